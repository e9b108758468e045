"""Sequence encodings built from embedding tables.

A sequence of token ids becomes either a single pooled vector (for
classification) or one vector per position (for masked-LM training).

Pooled layout (blocks concatenated in this order):
    unidirectional: flatten(X_1...X_n) || sum(x_j)
    bidirectional:  flatten(fw product) || flatten(bw product) || sum(x_j)
(The forward and backward vector sums coincide over a whole sequence, so
the pooled form carries a single vector-sum block.)

Per-token layout at position i (1-based):
    unidirectional: flatten(X_1...X_i) || sum_{j<=i} x_j
    bidirectional:  flatten(X^fw_1...X^fw_i) || flatten(X^bw_n...X^bw_i)
                    || sum_{j<=i} x_j || sum_{j>=i} x_j
Kinds without a matrix or vector part simply omit those blocks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import EmbeddingTable
from .errors import StructuralError
from .linalg import chain_product, check_finite, concat, flatten, prefix_scan, suffix_scan


@dataclass
class SequenceEncoding:
    """Either one pooled vector or an (n, dim) matrix of per-token rows."""

    mode: str  # "pooled" | "per-token"
    data: np.ndarray
    kind: str
    d: int
    d_vec: int

    @property
    def dim(self) -> int:
        return self.data.shape[-1]


def pooled_dim(table: EmbeddingTable) -> int:
    return table.dirs * table.d * table.d + table.d_vec


def per_token_dim(table: EmbeddingTable) -> int:
    if table.bidirectional:
        return 2 * table.d * table.d + 2 * table.d_vec
    if table.kind == "cbow":
        # direction-free vectors still get both partial sums
        return 2 * table.d_vec
    return table.d * table.d + table.d_vec


def _require_nonempty(ids) -> list[int]:
    ids = list(ids)
    if len(ids) == 0:
        raise StructuralError("cannot encode an empty sequence")
    return ids


def encode_cbow(ids, table: EmbeddingTable) -> np.ndarray:
    """Sum of the tokens' embedding vectors (order-insensitive)."""
    ids = _require_nonempty(ids)
    if not table.has_vectors:
        raise StructuralError(f"kind {table.kind} has no vector embeddings")
    return check_finite(table.vectors[ids].sum(axis=0), "vector sum")


def encode_cmow(ids, table: EmbeddingTable, direction: str = "forward", schedule: str = "sequential") -> np.ndarray:
    """Product of the tokens' embedding matrices.

    direction='forward' multiplies the forward table left-to-right;
    'backward' multiplies the backward table right-to-left (X_n ... X_1).
    """
    ids = _require_nonempty(ids)
    if not table.has_matrices:
        raise StructuralError(f"kind {table.kind} has no matrix embeddings")
    if direction == "forward":
        mats = [table.forward[i] for i in ids]
        return chain_product(mats, "left-to-right", schedule=schedule)
    if direction == "backward":
        if not table.bidirectional:
            raise StructuralError(f"kind {table.kind} has no backward matrices")
        mats = [table.backward[i] for i in ids]
        return chain_product(mats, "right-to-left", schedule=schedule)
    raise StructuralError(f"unknown direction {direction!r}")


def encode_pooled(ids, table: EmbeddingTable) -> SequenceEncoding:
    """Whole-sequence representation; see module docstring for the layout."""
    ids = _require_nonempty(ids)
    parts = []
    if table.has_matrices:
        parts.append(flatten(encode_cmow(ids, table, "forward")))
        if table.bidirectional:
            parts.append(flatten(encode_cmow(ids, table, "backward")))
    if table.has_vectors:
        parts.append(encode_cbow(ids, table))
    return SequenceEncoding(
        mode="pooled", data=concat(parts), kind=table.kind, d=table.d, d_vec=table.d_vec
    )


def encode_per_token(ids, table: EmbeddingTable) -> SequenceEncoding:
    """Per-position representations via one prefix scan and one suffix scan
    (O(n) matrix multiplications; every prefix/suffix is reused)."""
    ids = _require_nonempty(ids)
    n = len(ids)
    blocks = []
    if table.has_matrices:
        fw_prefix = prefix_scan([table.forward[i] for i in ids])
        blocks.append(np.stack([flatten(p) for p in fw_prefix]))
        if table.bidirectional:
            bw_suffix = suffix_scan([table.backward[i] for i in ids])
            blocks.append(np.stack([flatten(s) for s in bw_suffix]))
    if table.has_vectors:
        vecs = table.vectors[ids]
        fw_partial = np.cumsum(vecs, axis=0)
        blocks.append(fw_partial)
        if table.bidirectional or table.kind == "cbow":
            bw_partial = np.cumsum(vecs[::-1], axis=0)[::-1]
            blocks.append(bw_partial)
    data = np.concatenate(blocks, axis=1) if len(blocks) > 1 else blocks[0]
    assert data.shape == (n, per_token_dim(table))
    return SequenceEncoding(
        mode="per-token", data=data, kind=table.kind, d=table.d, d_vec=table.d_vec
    )


def combine_diffcat(h_a: np.ndarray, h_b: np.ndarray) -> np.ndarray:
    """Two-sequence feature: h_A || |h_A - h_B| || h_B."""
    h_a, h_b = np.asarray(h_a), np.asarray(h_b)
    if h_a.shape != h_b.shape or h_a.ndim != 1:
        raise StructuralError(f"DiffCat needs equal-length vectors, got {h_a.shape} and {h_b.shape}")
    return concat([h_a, np.abs(h_a - h_b), h_b])
