"""Hard, soft (teacher), and combined cross-entropy losses.

Soft loss is the cross-entropy between the teacher's distribution and the
temperature-flattened student softmax; no extra temperature-squared
rescaling is applied (training runs use unit temperature, where the
factor would be unobservable anyway).
"""

from __future__ import annotations

import numpy as np

from ..errors import StructuralError


def log_softmax(logits: np.ndarray) -> np.ndarray:
    """Numerically stable log-softmax along the last axis."""
    logits = np.asarray(logits, dtype=np.result_type(logits.dtype, np.float64))
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def _as_batch(logits: np.ndarray) -> np.ndarray:
    logits = np.asarray(logits)
    return logits[None, :] if logits.ndim == 1 else logits


def hard_loss(logits: np.ndarray, labels) -> float:
    """Mean negative log-softmax at the true labels.

    Accepts a single (k,) logit vector with an int label or a (B, k)
    batch with (B,) labels.
    """
    batch = _as_batch(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    if labels.shape[0] != batch.shape[0]:
        raise StructuralError(f"{labels.shape[0]} labels for {batch.shape[0]} logit rows")
    if labels.min() < 0 or labels.max() >= batch.shape[1]:
        raise StructuralError(
            f"label out of range: {labels.min()}..{labels.max()} for {batch.shape[1]} classes"
        )
    lsm = log_softmax(batch)
    return float(-lsm[np.arange(batch.shape[0]), labels].mean())


def _dense_teacher(teacher, n_classes: int) -> np.ndarray:
    """Accept a dense probability vector or a sparse (ids, probs) pair."""
    if isinstance(teacher, tuple):
        ids, probs = teacher
        dense = np.zeros(n_classes)
        dense[np.asarray(ids, dtype=np.int64)] = np.asarray(probs, dtype=np.float64)
        return dense
    dense = np.asarray(teacher, dtype=np.float64)
    if dense.shape != (n_classes,):
        raise StructuralError(f"teacher distribution shape {dense.shape} != ({n_classes},)")
    return dense


def soft_loss(student_logits: np.ndarray, teacher, temperature: float = 1.0) -> float:
    """Cross-entropy of the teacher distribution against softmax(s / T).

    `teacher` is a probability vector over the full class/vocab axis, or a
    (support ids, probs) pair for top-K records; it must sum to 1.
    Batched input takes a list of teacher distributions, one per row.
    """
    if temperature <= 0:
        raise StructuralError(f"temperature must be positive, got {temperature}")
    batch = _as_batch(student_logits)
    teachers = [teacher] if np.asarray(student_logits).ndim == 1 else list(teacher)
    if len(teachers) != batch.shape[0]:
        raise StructuralError(f"{len(teachers)} teacher rows for {batch.shape[0]} logit rows")
    lsm = log_softmax(batch / temperature)
    total = 0.0
    for row, t in zip(lsm, teachers):
        dense = _dense_teacher(t, batch.shape[1])
        if (dense < 0).any():
            raise StructuralError("teacher probabilities must be nonnegative")
        s = dense.sum()
        if abs(s - 1.0) > 1e-6:
            raise StructuralError(f"teacher distribution sums to {s}, expected 1")
        total += float(-(dense * row).sum())
    return total / batch.shape[0]


def combined_loss(hard: float, soft: float, alpha: float) -> float:
    """alpha * hard + (1 - alpha) * soft; alpha=1 ignores the teacher."""
    if not 0.0 <= alpha <= 1.0:
        raise StructuralError(f"alpha must be in [0, 1], got {alpha}")
    return alpha * hard + (1.0 - alpha) * soft


def grad_hard(logits: np.ndarray, labels) -> np.ndarray:
    """d(hard_loss)/d(logits), batch-mean convention; same shape as logits."""
    batch = _as_batch(logits)
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    g = softmax(batch)
    g[np.arange(batch.shape[0]), labels] -= 1.0
    g /= batch.shape[0]
    return g.reshape(np.shape(logits))


def grad_soft(student_logits: np.ndarray, teacher, temperature: float = 1.0) -> np.ndarray:
    """d(soft_loss)/d(student logits): (softmax(s/T) - t) / (T * batch)."""
    batch = _as_batch(student_logits)
    teachers = [teacher] if np.asarray(student_logits).ndim == 1 else list(teacher)
    g = softmax(batch / temperature)
    for i, t in enumerate(teachers):
        g[i] -= _dense_teacher(t, batch.shape[1])
    g /= temperature * batch.shape[0]
    return g.reshape(np.shape(student_logits))
