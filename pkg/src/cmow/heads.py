"""Output heads: linear masked-LM head and linear/MLP classifiers.

Dropout is inverted (scaled at train time) so evaluation needs no
rescaling and, with the training flag off, outputs are rng-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, StructuralError
from .linalg import dtype_for

HEAD_INIT_STD = 0.02


@dataclass
class DropoutPolicy:
    p_embed: float = 0.1
    p_hidden: float = 0.2
    training: bool = False

    def __post_init__(self):
        for name, p in (("p_embed", self.p_embed), ("p_hidden", self.p_hidden)):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {p}")


EVAL_DROPOUT = DropoutPolicy(training=False)


@dataclass
class MlmHead:
    """Affine map from per-token encodings to vocabulary logits."""

    weight: np.ndarray  # (n_vocab, in_dim)
    bias: np.ndarray  # (n_vocab,)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def n_vocab(self) -> int:
        return self.weight.shape[0]

    def parameter_count(self) -> int:
        return self.weight.size + self.bias.size


@dataclass
class ClassifierHead:
    """Linear probe or one-hidden-layer ReLU MLP over pooled features."""

    variant: str  # "linear" | "mlp"
    w1: np.ndarray  # linear: (classes, in) / mlp: (hidden, in)
    b1: np.ndarray
    w2: np.ndarray | None = None  # mlp only: (classes, hidden)
    b2: np.ndarray | None = None

    @property
    def in_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def n_classes(self) -> int:
        return self.b1.size if self.variant == "linear" else self.b2.size

    @property
    def hidden_dim(self) -> int:
        return 0 if self.variant == "linear" else self.b1.size

    def parameter_count(self) -> int:
        n = self.w1.size + self.b1.size
        if self.variant == "mlp":
            n += self.w2.size + self.b2.size
        return n


def init_mlm_head(in_dim: int, n_vocab: int, seed: int = 0, precision: str = "narrow") -> MlmHead:
    dtype = dtype_for(precision)
    rng = np.random.default_rng(seed)
    return MlmHead(
        weight=rng.normal(0.0, HEAD_INIT_STD, size=(n_vocab, in_dim)).astype(dtype),
        bias=np.zeros(n_vocab, dtype=dtype),
    )


def init_classifier(
    variant: str,
    in_dim: int,
    n_classes: int,
    hidden_dim: int | None = None,
    seed: int = 0,
    precision: str = "narrow",
) -> ClassifierHead:
    """hidden_dim defaults to in_dim for the MLP variant."""
    if variant not in ("linear", "mlp"):
        raise ConfigError(f"unknown classifier variant {variant!r}")
    if n_classes < 2:
        raise ConfigError(f"need at least 2 classes, got {n_classes}")
    dtype = dtype_for(precision)
    rng = np.random.default_rng(seed)
    if variant == "linear":
        return ClassifierHead(
            variant="linear",
            w1=rng.normal(0.0, HEAD_INIT_STD, size=(n_classes, in_dim)).astype(dtype),
            b1=np.zeros(n_classes, dtype=dtype),
        )
    hidden = in_dim if hidden_dim is None else hidden_dim
    if hidden <= 0:
        raise ConfigError(f"mlp hidden dim must be positive, got {hidden}")
    return ClassifierHead(
        variant="mlp",
        w1=rng.normal(0.0, HEAD_INIT_STD, size=(hidden, in_dim)).astype(dtype),
        b1=np.zeros(hidden, dtype=dtype),
        w2=rng.normal(0.0, HEAD_INIT_STD, size=(n_classes, hidden)).astype(dtype),
        b2=np.zeros(n_classes, dtype=dtype),
    )


def dropout_mask(shape, p: float, rng: np.random.Generator, dtype) -> np.ndarray:
    """Inverted-dropout multiplier: 0 with probability p, else 1/(1-p)."""
    if p <= 0.0:
        return np.ones(shape, dtype=dtype)
    keep = rng.random(shape) >= p
    return keep.astype(dtype) / np.asarray(1.0 - p, dtype=dtype)


def mlm_logits(
    per_token: np.ndarray,
    head: MlmHead,
    dropout: DropoutPolicy = EVAL_DROPOUT,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Per-position vocabulary logits: rows of `per_token` (n, in_dim)
    through the affine head, with input dropout when training."""
    per_token = np.atleast_2d(per_token)
    if per_token.shape[1] != head.in_dim:
        raise StructuralError(
            f"encoding dim {per_token.shape[1]} does not match MLM head input dim {head.in_dim}"
        )
    if dropout.training and dropout.p_embed > 0.0:
        if rng is None:
            raise StructuralError("training-mode dropout needs an rng")
        per_token = per_token * dropout_mask(per_token.shape, dropout.p_embed, rng, per_token.dtype)
    return per_token @ head.weight.T + head.bias


def classify(
    features: np.ndarray,
    head: ClassifierHead,
    dropout: DropoutPolicy = EVAL_DROPOUT,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Class logits for one pooled (or DiffCat) feature vector."""
    features = np.asarray(features)
    if features.ndim != 1 or features.shape[0] != head.in_dim:
        raise StructuralError(
            f"feature dim {features.shape} does not match classifier input dim {head.in_dim}"
        )
    train = dropout.training
    if train and (dropout.p_embed > 0.0 or dropout.p_hidden > 0.0) and rng is None:
        raise StructuralError("training-mode dropout needs an rng")
    x = features
    if train and dropout.p_embed > 0.0:
        x = x * dropout_mask(x.shape, dropout.p_embed, rng, x.dtype)
    z = head.w1 @ x + head.b1
    if head.variant == "linear":
        return z
    a = np.maximum(z, 0.0)
    if train and dropout.p_hidden > 0.0:
        a = a * dropout_mask(a.shape, dropout.p_hidden, rng, a.dtype)
    return head.w2 @ a + head.b2
