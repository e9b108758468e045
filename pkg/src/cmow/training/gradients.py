"""Manual reverse-mode gradients through matrix-product encodings.

The only nontrivial piece is differentiating a loss through the prefix
products P_i = M_1 @ ... @ M_i.  With upstream gradients G_i = dL/dP_i,

    dL/dM_k = P_{k-1}^T @ S_k,   S_n = G_n,   S_k = G_k + S_{k+1} @ M_{k+1}^T

which costs O(n) multiplications using the cached prefixes.  Backward-
direction chains reuse the same recurrence on the reversed sequence.

Batches are padded to a common length with identity matrices (matrix
side) and zero vectors (vector side), which leaves products and sums
untouched; gradients at padded slots are discarded before scattering
into the embedding tables.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..embeddings import EmbeddingTable
from ..errors import StructuralError
from ..linalg import _check_uniform


def chain_grad(mats, upstream):
    """Gradients of a chain product w.r.t. each factor.

    mats is a list of n square matrices.  `upstream` is either a single
    matrix (the gradient w.r.t. the full product M_1...M_n) or a list of n
    matrices (gradients w.r.t. every prefix, as produced by per-token
    encodings).  Returns a list of n per-factor gradients.
    """
    d = _check_uniform(list(mats))
    n = len(mats)
    if n == 0:
        return []
    M = np.stack(mats)[None]  # (1, n, d, d)
    G = np.stack(upstream) if isinstance(upstream, (list, tuple)) else None
    if G is None:
        up = np.asarray(upstream)
        if up.shape != (d, d):
            raise StructuralError(f"upstream shape {up.shape} does not match product shape ({d}, {d})")
        G = np.zeros((n, d, d), dtype=up.dtype)
        G[n - 1] = up
    elif G.shape != (n, d, d):
        raise StructuralError(f"need one upstream per prefix: got {G.shape}, expected ({n}, {d}, {d})")
    P = np.empty_like(M)
    P[:, 0] = M[:, 0]
    for i in range(1, n):
        P[:, i] = P[:, i - 1] @ M[:, i]
    return list(_chain_grad_batched(M, G[None], P)[0])


def _chain_grad_batched(M: np.ndarray, G: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Batched form of the recurrence; all arrays are (B, n, d, d)."""
    B, n = M.shape[:2]
    dM = np.empty_like(M)
    S = G[:, n - 1].astype(M.dtype, copy=True)
    for k in range(n - 1, -1, -1):
        if k < n - 1:
            S = G[:, k] + S @ M[:, k + 1].swapaxes(-1, -2)
            S = S.astype(M.dtype, copy=False)
        dM[:, k] = P[:, k - 1].swapaxes(-1, -2) @ S if k > 0 else S
    return dM


def pad_batch(sequences: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    """Stack variable-length id lists into (B, n) ids plus a validity mask."""
    if len(sequences) == 0:
        raise StructuralError("empty batch")
    n = max(len(s) for s in sequences)
    if n == 0:
        raise StructuralError("batch of empty sequences")
    ids = np.zeros((len(sequences), n), dtype=np.int64)
    mask = np.zeros((len(sequences), n), dtype=bool)
    for b, seq in enumerate(sequences):
        ids[b, : len(seq)] = seq
        mask[b, : len(seq)] = True
    return ids, mask


@dataclass
class EncodeCache:
    """Everything the backward pass needs from a batched encode."""

    mode: str  # "pooled" | "per-token"
    ids: np.ndarray
    mask: np.ndarray
    rep: np.ndarray  # (B, D) pooled or (B, n, D) per-token
    FW: np.ndarray | None = None
    BW: np.ndarray | None = None
    P: np.ndarray | None = None  # forward prefixes
    R: np.ndarray | None = None  # backward suffixes
    V: np.ndarray | None = None

    @property
    def dtype(self):
        return self.rep.dtype


def encode_batch(table: EmbeddingTable, ids: np.ndarray, mask: np.ndarray, mode: str) -> EncodeCache:
    """Batched pooled / per-token encoding with cached intermediates."""
    if mode not in ("pooled", "per-token"):
        raise StructuralError(f"unknown encode mode {mode!r}")
    if (~mask).all(axis=1).any():
        raise StructuralError("batch contains an empty sequence")
    B, n = ids.shape
    d, dv = table.d, table.d_vec
    bidi = table.bidirectional
    FW = BW = P = R = V = Cf = Cb = None
    if table.has_matrices:
        eye = np.eye(d, dtype=table.dtype)
        FW = table.forward[ids]
        FW[~mask] = eye
        P = np.empty_like(FW)
        P[:, 0] = FW[:, 0]
        for i in range(1, n):
            P[:, i] = P[:, i - 1] @ FW[:, i]
        if bidi:
            BW = table.backward[ids]
            BW[~mask] = eye
            R = np.empty_like(BW)
            R[:, n - 1] = BW[:, n - 1]
            for i in range(n - 2, -1, -1):
                R[:, i] = R[:, i + 1] @ BW[:, i]
    if table.has_vectors:
        V = table.vectors[ids]
        V[~mask] = 0
        Cf = np.cumsum(V, axis=1)
        if bidi or table.kind == "cbow":
            Cb = np.cumsum(V[:, ::-1], axis=1)[:, ::-1]
    if mode == "pooled":
        parts = []
        if table.has_matrices:
            parts.append(P[:, n - 1].reshape(B, d * d))
            if bidi:
                parts.append(R[:, 0].reshape(B, d * d))
        if table.has_vectors:
            parts.append(Cf[:, n - 1])
        rep = np.concatenate(parts, axis=1)
    else:
        parts = []
        if table.has_matrices:
            parts.append(P.reshape(B, n, d * d))
            if bidi:
                parts.append(R.reshape(B, n, d * d))
        if table.has_vectors:
            parts.append(Cf)
            if bidi or table.kind == "cbow":
                parts.append(Cb)
        rep = np.concatenate(parts, axis=2)
    return EncodeCache(mode=mode, ids=ids, mask=mask, rep=rep, FW=FW, BW=BW, P=P, R=R, V=V)


def encode_pooled_nograd(table: EmbeddingTable, ids: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Forward-only batched pooled encoding (evaluation / benchmarking)."""
    B, n = ids.shape
    d = table.d
    parts = []
    if table.has_matrices:
        eye = np.eye(d, dtype=table.dtype)
        FW = table.forward[ids]
        if mask is not None:
            FW[~mask] = eye
        acc = FW[:, 0]
        for i in range(1, n):
            acc = acc @ FW[:, i]
        parts.append(acc.reshape(B, d * d))
        if table.bidirectional:
            BW = table.backward[ids]
            if mask is not None:
                BW[~mask] = eye
            acc = BW[:, n - 1]
            for i in range(n - 2, -1, -1):
                acc = acc @ BW[:, i]
            parts.append(acc.reshape(B, d * d))
    if table.has_vectors:
        V = table.vectors[ids]
        if mask is not None:
            V[~mask] = 0
        parts.append(V.sum(axis=1))
    return np.concatenate(parts, axis=1)


def _rev_cumsum(x: np.ndarray) -> np.ndarray:
    return np.cumsum(x[:, ::-1], axis=1)[:, ::-1]


def encode_backward(cache: EncodeCache, upstream: np.ndarray, grads: dict[str, np.ndarray], table: EmbeddingTable) -> None:
    """Accumulate dL/d(embedding tables) into `grads` given dL/d(rep)."""
    B, n = cache.ids.shape
    d, dv = table.d, table.d_vec
    bidi = table.bidirectional
    up = np.asarray(upstream, dtype=cache.dtype)
    real = cache.mask
    ids_real = cache.ids[real]
    off = 0
    if cache.mode == "pooled":
        Gf = Gb = gv = None
        if table.has_matrices:
            Gf = np.zeros_like(cache.FW)
            Gf[:, n - 1] = up[:, off : off + d * d].reshape(B, d, d)
            off += d * d
            if bidi:
                Gb = np.zeros_like(cache.BW)
                Gb[:, 0] = up[:, off : off + d * d].reshape(B, d, d)
                off += d * d
        if table.has_vectors:
            gv = up[:, off : off + dv]
            dV = np.broadcast_to(gv[:, None, :], (B, n, dv)).copy()
            off += dv
    else:
        if table.has_matrices:
            Gf = up[:, :, off : off + d * d].reshape(B, n, d, d)
            off += d * d
            if bidi:
                Gb = up[:, :, off : off + d * d].reshape(B, n, d, d)
                off += d * d
        if table.has_vectors:
            gcf = up[:, :, off : off + dv]
            off += dv
            dV = _rev_cumsum(gcf)
            if bidi or table.kind == "cbow":
                gcb = up[:, :, off : off + dv]
                off += dv
                dV = dV + np.cumsum(gcb, axis=1)
    if table.has_matrices:
        dFW = _chain_grad_batched(cache.FW, Gf, cache.P)
        np.add.at(grads["emb.forward"], ids_real, dFW[real])
        if bidi:
            dBWr = _chain_grad_batched(
                cache.BW[:, ::-1], Gb[:, ::-1], cache.R[:, ::-1]
            )
            dBW = dBWr[:, ::-1]
            np.add.at(grads["emb.backward"], ids_real, dBW[real])
    if table.has_vectors:
        np.add.at(grads["emb.vectors"], ids_real, dV[real])
