"""Dense square-matrix arithmetic and associative product scans.

Matrices are plain numpy arrays of shape (d, d); vectors are 1-D arrays.
Two dtypes are supported throughout the library: ``wide`` (float64, used
for gradient checks and oracles) and ``narrow`` (float32, used for
training and benchmarks).  All functions here are pure and preserve the
dtype of their inputs.

Flattening is row-major (C order); classifier weights depend on this
convention, so it is fixed here and used everywhere.
"""

from __future__ import annotations

import numpy as np

from .errors import NumericalError, StructuralError

WIDE = np.float64
NARROW = np.float32

DTYPES = {"wide": WIDE, "narrow": NARROW}


def dtype_for(precision: str) -> np.dtype:
    """Map a precision-mode name ('wide' or 'narrow') to a numpy dtype."""
    try:
        return DTYPES[precision]
    except KeyError:
        raise StructuralError(f"unknown precision mode {precision!r}; expected 'wide' or 'narrow'")


def _check_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise StructuralError(f"{name} must be square, got shape {m.shape}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Standard matrix product of two same-dimension square matrices."""
    _check_square(a, "a")
    _check_square(b, "b")
    if a.shape != b.shape:
        raise StructuralError(f"dimension mismatch: {a.shape} x {b.shape}")
    return check_finite(a @ b, "matrix product")


def flatten(m: np.ndarray) -> np.ndarray:
    """Collapse a square matrix into a length d*d vector, row-major."""
    _check_square(m)
    return np.ascontiguousarray(m).reshape(-1)


def unflatten(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`flatten`; infers d from the vector length."""
    v = np.asarray(v)
    if v.ndim != 1:
        raise StructuralError(f"expected a 1-D vector, got shape {v.shape}")
    d = int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise StructuralError(f"vector of length {v.size} is not a flattened square matrix")
    return v.reshape(d, d)


def concat(parts: list[np.ndarray]) -> np.ndarray:
    """Concatenate vectors in order. The list must be nonempty; individual
    parts may be empty vectors."""
    if len(parts) == 0:
        raise StructuralError("concat of an empty list of vectors")
    for p in parts:
        if np.asarray(p).ndim != 1:
            raise StructuralError(f"concat parts must be 1-D, got shape {np.shape(p)}")
    return np.concatenate(parts)


def _check_uniform(ms: list[np.ndarray]) -> int:
    """Validate a list of square matrices with equal dims; return d."""
    d = -1
    for i, m in enumerate(ms):
        _check_square(m, f"ms[{i}]")
        if d == -1:
            d = m.shape[0]
        elif m.shape[0] != d:
            raise StructuralError(f"mixed dims in matrix list: {d} vs {m.shape[0]} at index {i}")
    return d


def chain_product(
    ms: list[np.ndarray],
    direction: str = "left-to-right",
    schedule: str = "sequential",
    d: int | None = None,
    dtype=None,
) -> np.ndarray:
    """Product of a list of square matrices.

    direction='left-to-right' computes ms[0] @ ms[1] @ ... @ ms[n-1];
    'right-to-left' computes ms[n-1] @ ms[n-2] @ ... @ ms[0].

    schedule='sequential' is a left fold; 'tree' reduces pairwise with a
    balanced tree (same O(n) multiplication count, log-depth), which agrees
    with the fold to within roundoff only.

    The empty product is the identity; for an empty list, `d` (and
    optionally `dtype`) must be given so the identity size is known.
    """
    if direction not in ("left-to-right", "right-to-left"):
        raise StructuralError(f"unknown direction {direction!r}")
    if schedule not in ("sequential", "tree"):
        raise StructuralError(f"unknown schedule {schedule!r}")
    if len(ms) == 0:
        if d is None:
            raise StructuralError("empty chain_product needs an explicit dimension d")
        return np.eye(d, dtype=dtype if dtype is not None else WIDE)
    _check_uniform(ms)
    order = list(ms) if direction == "left-to-right" else list(ms[::-1])
    if schedule == "sequential":
        acc = order[0]
        for m in order[1:]:
            acc = acc @ m
        return check_finite(acc, "chain product")
    while len(order) > 1:
        nxt = [order[i] @ order[i + 1] for i in range(0, len(order) - 1, 2)]
        if len(order) % 2 == 1:
            nxt.append(order[-1])
        order = nxt
    return check_finite(order[0], "chain product")


def prefix_scan(ms: list[np.ndarray], schedule: str = "sequential") -> list[np.ndarray]:
    """Inclusive prefix products: out[i] = ms[0] @ ms[1] @ ... @ ms[i].

    The 'tree' schedule runs the scan in O(log n) data-parallel rounds of
    batched multiplications (the multiplication is associative, so the
    result agrees with the sequential fold to within roundoff).
    """
    if schedule not in ("sequential", "tree"):
        raise StructuralError(f"unknown schedule {schedule!r}")
    _check_uniform(ms)
    n = len(ms)
    if n == 0:
        return []
    if schedule == "sequential":
        out = [ms[0]]
        for m in ms[1:]:
            out.append(out[-1] @ m)
        check_finite(np.stack(out), "prefix scan")
        return out
    # Hillis-Steele: log2(n) rounds, each a single batched matmul.
    x = np.stack(ms)
    shift = 1
    while shift < n:
        x[shift:] = x[:-shift] @ x[shift:]
        shift *= 2
    check_finite(x, "prefix scan")
    return list(x)


def suffix_scan(ms: list[np.ndarray], schedule: str = "sequential") -> list[np.ndarray]:
    """Suffix products in back-to-front multiplication order:
    out[i] = ms[n-1] @ ms[n-2] @ ... @ ms[i]."""
    rev = prefix_scan(list(ms[::-1]), schedule=schedule)
    return rev[::-1]


def check_finite(a: np.ndarray, what: str = "array") -> np.ndarray:
    """Raise NumericalError if the array contains NaN or Inf.

    Multiplication-based public operations enforce the finiteness
    invariant through this; pure rearrangements (flatten, concat) cannot
    introduce non-finite values and skip the check.  The batched training
    path checks loss/gradient finiteness per step instead of per matmul.
    """
    if not np.isfinite(a).all():
        raise NumericalError(f"non-finite values in {what}")
    return a
