"""Mask-site derivation, reproducing the student trainer's contract.

The student keys teacher records by (corpus line, token position), so the
exporter must select and corrupt exactly the same sites.  The derivation
is fixed by the TDR1 contract:

  1. rng = numpy.random.default_rng([seed, line_id])
  2. maskable = positions whose id is not a special token, ascending
  3. k = min(ceil(fraction * len(ids)), len(maskable))
  4. chosen = sorted(rng.choice(maskable, size=k, replace=False))
  5. per chosen position, in ascending order, u = rng.random():
     u < 0.8 -> [MASK]; u < 0.9 -> rng.integers(0, n_vocab); else keep.
"""

from __future__ import annotations

import math

import numpy as np

MASK_PROB = 0.8
RANDOM_PROB = 0.1


def line_rng(seed: int, line_id: int) -> np.random.Generator:
    return np.random.default_rng([seed, line_id])


def mask_sequence(ids, fraction, special_ids, mask_id, n_vocab, rng):
    """Returns (corrupted ids, target positions, original ids) or None for
    sequences with nothing maskable."""
    maskable = np.array([i for i, t in enumerate(ids) if t not in special_ids], dtype=np.int64)
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
            out[pos] = mask_id
        elif u < MASK_PROB + RANDOM_PROB:
            out[pos] = int(rng.integers(0, n_vocab))
        # else keep the original token
    return out, [int(p) for p in chosen], originals
