"""The demo scripts must stay runnable."""

import subprocess
import sys
from pathlib import Path

import pytest

DEMOS = Path(__file__).parent.parent / "demos"


@pytest.mark.parametrize(
    "script",
    [
        "01_order_sensitivity.py",
        "02_per_token_and_scans.py",
        "03_mlm_pretraining.py",
        "04_distillation.py",
        "05_two_sentence_diffcat.py",
    ],
)
def test_demo_runs_clean(script):
    result = subprocess.run(
        [sys.executable, str(DEMOS / script)], capture_output=True, text=True, timeout=180
    )
    assert result.returncode == 0, result.stderr
    assert result.stdout.strip()
