"""Learnable embedding tables: per-token square matrices and vectors.

Matrix embeddings start at identity plus Gaussian noise so that a fresh
model encodes every sequence to (nearly) the identity matrix; vector
embeddings start at zero-mean Gaussian noise of the same scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StructuralError
from .linalg import dtype_for

KINDS = (
    "cmow-unidirectional",
    "cmow-bidirectional",
    "cbow",
    "hybrid-unidirectional",
    "hybrid-bidirectional",
)


@dataclass
class EmbeddingTable:
    """The model's learnable bulk.

    forward/backward hold n_vocab stacked (d, d) matrices; vectors holds
    n_vocab rows of length d_vec.  Fields are None when the kind has no
    such part.
    """

    kind: str
    d: int
    d_vec: int
    n_vocab: int
    forward: np.ndarray | None
    backward: np.ndarray | None
    vectors: np.ndarray | None

    @property
    def bidirectional(self) -> bool:
        return self.kind.endswith("bidirectional")

    @property
    def has_matrices(self) -> bool:
        return self.d > 0

    @property
    def has_vectors(self) -> bool:
        return self.d_vec > 0

    @property
    def dirs(self) -> int:
        return 2 if self.bidirectional else 1

    @property
    def dtype(self) -> np.dtype:
        arr = self.forward if self.forward is not None else self.vectors
        return arr.dtype


def _validate_dims(kind: str, d: int, d_vec: int) -> None:
    if kind not in KINDS:
        raise ConfigError(f"unknown embedding kind {kind!r}; expected one of {KINDS}")
    if d < 0 or d_vec < 0:
        raise ConfigError(f"negative dims: d={d}, d_vec={d_vec}")
    if d == 0 and d_vec == 0:
        raise ConfigError("d and d_vec cannot both be zero")
    wants_matrices = kind != "cbow"
    wants_vectors = kind == "cbow" or kind.startswith("hybrid")
    if wants_matrices and d == 0:
        raise ConfigError(f"kind {kind} needs d > 0")
    if not wants_matrices and d != 0:
        raise ConfigError(f"kind {kind} has no matrix part; got d={d}")
    if wants_vectors and d_vec == 0:
        raise ConfigError(f"kind {kind} needs d_vec > 0")
    if not wants_vectors and d_vec != 0:
        raise ConfigError(f"kind {kind} has no vector part; got d_vec={d_vec}")


def init(
    kind: str,
    d: int,
    d_vec: int,
    n_vocab: int,
    sigma_init: float = 0.01,
    seed: int = 0,
    precision: str = "narrow",
) -> EmbeddingTable:
    """Allocate and initialize a table: matrices = I + N(0, sigma^2),
    vectors = N(0, sigma^2).  Deterministic per seed; draw order is
    forward, backward, vectors."""
    _validate_dims(kind, d, d_vec)
    if n_vocab <= 0:
        raise ConfigError(f"n_vocab must be positive, got {n_vocab}")
    if sigma_init < 0:
        raise ConfigError(f"sigma_init must be nonnegative, got {sigma_init}")
    dtype = dtype_for(precision)
    rng = np.random.default_rng(seed)
    forward = backward = vectors = None
    if d > 0:
        eye = np.eye(d, dtype=dtype)
        forward = eye + rng.normal(0.0, sigma_init, size=(n_vocab, d, d)).astype(dtype)
        if kind.endswith("bidirectional"):
            backward = eye + rng.normal(0.0, sigma_init, size=(n_vocab, d, d)).astype(dtype)
    if d_vec > 0:
        vectors = rng.normal(0.0, sigma_init, size=(n_vocab, d_vec)).astype(dtype)
    return EmbeddingTable(
        kind=kind, d=d, d_vec=d_vec, n_vocab=n_vocab,
        forward=forward, backward=backward, vectors=vectors,
    )


def parameter_count(table: EmbeddingTable) -> int:
    """n_vocab * (dirs * d^2 + d_vec); embeddings only, no heads."""
    return table.n_vocab * (table.dirs * table.d * table.d + table.d_vec)


def lookup(table: EmbeddingTable, token_id: int):
    """Views of the stored parameters for one token id:
    (forward matrix or None, backward matrix or None, vector or None)."""
    if not 0 <= token_id < table.n_vocab:
        raise StructuralError(f"token id {token_id} out of range [0, {table.n_vocab})")
    fw = table.forward[token_id] if table.forward is not None else None
    bw = table.backward[token_id] if table.backward is not None else None
    vec = table.vectors[token_id] if table.vectors is not None else None
    return fw, bw, vec


def clone(table: EmbeddingTable) -> EmbeddingTable:
    """Deep copy (used for best-checkpoint tracking during training)."""
    cp = lambda a: None if a is None else a.copy()
    return EmbeddingTable(
        kind=table.kind, d=table.d, d_vec=table.d_vec, n_vocab=table.n_vocab,
        forward=cp(table.forward), backward=cp(table.backward), vectors=cp(table.vectors),
    )
