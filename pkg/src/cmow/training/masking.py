"""Masked-language-model corruption with reproducible site selection.

Teacher records are keyed by (corpus line, token position), so the mask
pattern must be a pure function of (mask seed, line id) — independent of
batch composition, epoch, or worker count.  The derivation below is part
of the teacher-record wire contract and must be reproduced exactly by any
exporter:

  1. rng = numpy.random.default_rng([seed, line_id])
  2. maskable = positions whose id is not one of the five special tokens,
     in ascending order
  3. k = min(ceil(fraction * len(ids)), len(maskable))
  4. chosen = sorted(rng.choice(maskable, size=k, replace=False))
  5. for each chosen position, in ascending order, draw u = rng.random():
     u < 0.8 -> replace with [MASK]; u < 0.9 -> replace with
     rng.integers(0, n_vocab); else keep the original token.

Targets always record the original token id, whatever the corruption.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import StructuralError
from ..tokenizer import Vocabulary

log = logging.getLogger("cmow")

MASK_PROB = 0.8
RANDOM_PROB = 0.1  # remainder keeps the original token


@dataclass
class MaskedBatch:
    sequences: list[list[int]]  # corrupted token ids
    positions: list[list[int]]  # target positions per sequence
    originals: list[list[int]]  # original ids at those positions
    line_ids: list[int]  # key half for teacher-record lookup


def line_rng(seed: int, line_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, line_id])


def mask_sequence(
    ids: list[int], fraction: float, vocab: Vocabulary, rng: np.random.Generator
) -> tuple[list[int], list[int], list[int]] | None:
    """Corrupt one sequence; returns (masked ids, positions, originals) or
    None when there is nothing maskable (specials-only input)."""
    special = vocab.special_ids
    maskable = np.array([i for i, t in enumerate(ids) if t not in special], dtype=np.int64)
    if maskable.size == 0:
        return None
    k = min(math.ceil(fraction * len(ids)), maskable.size)
    chosen = np.sort(rng.choice(maskable, size=k, replace=False))
    out = list(ids)
    originals = []
    for pos in chosen:
        originals.append(out[pos])
        u = rng.random()
        if u < MASK_PROB:
            out[pos] = vocab.mask_id
        elif u < MASK_PROB + RANDOM_PROB:
            out[pos] = int(rng.integers(0, vocab.n_vocab))
        # else: keep the original token (still a prediction target)
    return out, [int(p) for p in chosen], originals


def mask_batch(
    sequences: list[list[int]],
    fraction: float,
    vocab: Vocabulary,
    seed: int,
    line_ids: list[int] | None = None,
) -> MaskedBatch:
    """Apply :func:`mask_sequence` to every sequence with per-line rngs.

    `line_ids` are the original corpus line numbers (defaults to the batch
    enumeration); sequences with no maskable position are skipped with a
    warning.
    """
    if not 0.0 < fraction < 1.0:
        raise StructuralError(f"mask fraction must be in (0, 1), got {fraction}")
    if line_ids is None:
        line_ids = list(range(len(sequences)))
    if len(line_ids) != len(sequences):
        raise StructuralError(f"{len(line_ids)} line ids for {len(sequences)} sequences")
    batch = MaskedBatch(sequences=[], positions=[], originals=[], line_ids=[])
    for ids, line_id in zip(sequences, line_ids):
        result = mask_sequence(list(ids), fraction, vocab, line_rng(seed, line_id))
        if result is None:
            log.warning("line %d has no maskable tokens; skipped", line_id)
            continue
        masked, positions, originals = result
        batch.sequences.append(masked)
        batch.positions.append(positions)
        batch.originals.append(originals)
        batch.line_ids.append(line_id)
    return batch
