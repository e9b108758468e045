"""Model bundle (embeddings + heads) and the batched loss paths.

Each `*_step` function runs one forward/backward pass over a batch and
returns the losses plus a GradientBundle holding dL/d(parameter) for
every trainable array.  All paths share the batch-mean loss convention.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import embeddings
from ..embeddings import EmbeddingTable
from ..errors import NumericalError, StructuralError
from ..heads import ClassifierHead, DropoutPolicy, MlmHead, dropout_mask
from . import losses
from .gradients import encode_backward, encode_batch, pad_batch


@dataclass
class Model:
    table: EmbeddingTable
    mlm_head: MlmHead | None = None
    classifier: ClassifierHead | None = None
    dropout: DropoutPolicy = field(default_factory=DropoutPolicy)

    def parameters(self) -> dict[str, np.ndarray]:
        """Live views of every trainable array, keyed by stable names."""
        params: dict[str, np.ndarray] = {}
        if self.table.forward is not None:
            params["emb.forward"] = self.table.forward
        if self.table.backward is not None:
            params["emb.backward"] = self.table.backward
        if self.table.vectors is not None:
            params["emb.vectors"] = self.table.vectors
        if self.mlm_head is not None:
            params["mlm.weight"] = self.mlm_head.weight
            params["mlm.bias"] = self.mlm_head.bias
        if self.classifier is not None:
            params["clf.w1"] = self.classifier.w1
            params["clf.b1"] = self.classifier.b1
            if self.classifier.variant == "mlp":
                params["clf.w2"] = self.classifier.w2
                params["clf.b2"] = self.classifier.b2
        return params

    def state_copy(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.parameters().items()}

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = self.parameters()
        if set(params) != set(state):
            raise StructuralError(f"state keys {sorted(state)} != model keys {sorted(params)}")
        for k, v in params.items():
            v[...] = state[k]

    def parameter_count(self) -> int:
        return sum(v.size for v in self.parameters().values())


class GradientBundle:
    """Per-parameter gradient buffers, shape-congruent with the model."""

    def __init__(self, model: Model):
        self.buffers: dict[str, np.ndarray] = {
            k: np.zeros_like(v) for k, v in model.parameters().items()
        }

    def __getitem__(self, key: str) -> np.ndarray:
        return self.buffers[key]

    def __setitem__(self, key: str, value: np.ndarray) -> None:
        if key not in self.buffers:
            raise StructuralError(f"unknown gradient buffer {key!r}")
        self.buffers[key] = value

    def zero_(self) -> None:
        for v in self.buffers.values():
            v[...] = 0

    def global_norm(self) -> float:
        total = 0.0
        for v in self.buffers.values():
            total += float(np.square(v, dtype=np.float64).sum())
        return float(np.sqrt(total))

    def clip_(self, max_norm: float) -> float:
        """Scale all buffers so the global norm is at most max_norm;
        returns the pre-clip norm."""
        norm = self.global_norm()
        if not np.isfinite(norm):
            raise NumericalError(f"gradient norm is {norm}")
        if max_norm > 0 and norm > max_norm:
            scale = max_norm / norm
            for v in self.buffers.values():
                v *= scale
        return norm


def _dropout_pair(shape, p: float, training: bool, rng, dtype):
    """Multiplier array for inverted dropout (ones when not training)."""
    if not training or p <= 0.0:
        return None
    if rng is None:
        raise StructuralError("training-mode dropout needs an rng")
    return dropout_mask(shape, p, rng, dtype)


def _classifier_forward(head: ClassifierHead, x: np.ndarray, dropout: DropoutPolicy, rng):
    """Batched head forward; returns (logits, cache-for-backward)."""
    m_in = _dropout_pair(x.shape, dropout.p_embed, dropout.training, rng, x.dtype)
    xd = x if m_in is None else x * m_in
    z1 = xd @ head.w1.T + head.b1
    if head.variant == "linear":
        return z1, {"xd": xd, "m_in": m_in}
    a = np.maximum(z1, 0)
    m_h = _dropout_pair(a.shape, dropout.p_hidden, dropout.training, rng, x.dtype)
    ad = a if m_h is None else a * m_h
    logits = ad @ head.w2.T + head.b2
    return logits, {"xd": xd, "m_in": m_in, "z1": z1, "ad": ad, "m_h": m_h}


def _classifier_backward(head: ClassifierHead, cache: dict, dlogits: np.ndarray, grads: GradientBundle):
    """Accumulate head gradients; returns dL/dx (the head-input gradient)."""
    dlogits = dlogits.astype(cache["xd"].dtype, copy=False)
    if head.variant == "linear":
        grads["clf.w1"] += dlogits.T @ cache["xd"]
        grads["clf.b1"] += dlogits.sum(axis=0)
        dxd = dlogits @ head.w1
    else:
        grads["clf.w2"] += dlogits.T @ cache["ad"]
        grads["clf.b2"] += dlogits.sum(axis=0)
        dad = dlogits @ head.w2
        da = dad if cache["m_h"] is None else dad * cache["m_h"]
        dz1 = da * (cache["z1"] > 0)
        grads["clf.w1"] += dz1.T @ cache["xd"]
        grads["clf.b1"] += dz1.sum(axis=0)
        dxd = dz1 @ head.w1
    return dxd if cache["m_in"] is None else dxd * cache["m_in"]


def _combined_dlogits(logits, labels, teachers, alpha: float, temperature: float):
    """Loss values and dL/dlogits for alpha*hard + (1-alpha)*soft."""
    hard = losses.hard_loss(logits, labels) if alpha > 0 else 0.0
    soft = losses.soft_loss(logits, teachers, temperature) if alpha < 1 and teachers is not None else 0.0
    if alpha < 1 and teachers is None:
        raise StructuralError("soft loss requested (alpha < 1) but no teacher rows given")
    d = np.zeros(logits.shape)
    if alpha > 0:
        d += alpha * losses.grad_hard(logits, labels)
    if alpha < 1:
        d += (1 - alpha) * losses.grad_soft(logits, teachers, temperature)
    return hard, soft, d


def mlm_step(
    model: Model,
    sequences: list[list[int]],
    positions: list[list[int]],
    originals: list[list[int]],
    teacher_rows: list | None = None,
    alpha: float = 1.0,
    temperature: float = 1.0,
    rng: np.random.Generator | None = None,
):
    """Masked-LM forward/backward over one batch.

    teacher_rows, when given, is one (support ids, probs) pair per target
    site, flattened in batch order to match positions.
    """
    ids, mask = pad_batch(sequences)
    cache = encode_batch(model.table, ids, mask, "per-token")
    tb = np.concatenate([[b] * len(p) for b, p in enumerate(positions)]).astype(np.int64)
    ti = np.concatenate([np.asarray(p, dtype=np.int64) for p in positions])
    tids = np.concatenate([np.asarray(o, dtype=np.int64) for o in originals])
    rep_t = cache.rep[tb, ti]
    m_in = _dropout_pair(rep_t.shape, model.dropout.p_embed, model.dropout.training, rng, rep_t.dtype)
    rep_d = rep_t if m_in is None else rep_t * m_in
    logits = rep_d @ model.mlm_head.weight.T + model.mlm_head.bias
    hard, soft, dlogits = _combined_dlogits(logits, tids, teacher_rows, alpha, temperature)
    grads = GradientBundle(model)
    dlogits = dlogits.astype(rep_d.dtype, copy=False)
    grads["mlm.weight"] += dlogits.T @ rep_d
    grads["mlm.bias"] += dlogits.sum(axis=0)
    drep = dlogits @ model.mlm_head.weight
    if m_in is not None:
        drep = drep * m_in
    d_rep_full = np.zeros_like(cache.rep)
    np.add.at(d_rep_full, (tb, ti), drep)
    encode_backward(cache, d_rep_full, grads.buffers, model.table)
    loss = losses.combined_loss(hard, soft, alpha)
    return {"loss": loss, "hard": hard, "soft": soft, "n_targets": len(tids)}, grads


def _pooled_features(model: Model, batches: list[list[list[int]]]):
    """Encode one or two pooled batches (two => DiffCat combination)."""
    caches = []
    feats = []
    for seqs in batches:
        ids, mask = pad_batch(seqs)
        cache = encode_batch(model.table, ids, mask, "pooled")
        caches.append(cache)
        feats.append(cache.rep)
    if len(feats) == 1:
        return feats[0], caches, None
    ha, hb = feats
    sign = np.sign(ha - hb)
    x = np.concatenate([ha, np.abs(ha - hb), hb], axis=1)
    return x, caches, sign


def classify_step(
    model: Model,
    seqs_a: list[list[int]],
    seqs_b: list[list[int]] | None,
    labels,
    teacher_rows: list | None = None,
    alpha: float = 1.0,
    temperature: float = 1.0,
    rng: np.random.Generator | None = None,
):
    """Classification forward/backward: single-sequence / joint batches
    pass seqs_b=None; DiffCat passes both sides."""
    batches = [seqs_a] if seqs_b is None else [seqs_a, seqs_b]
    x, caches, sign = _pooled_features(model, batches)
    logits, hcache = _classifier_forward(model.classifier, x, model.dropout, rng)
    hard, soft, dlogits = _combined_dlogits(logits, labels, teacher_rows, alpha, temperature)
    grads = GradientBundle(model)
    dx = _classifier_backward(model.classifier, hcache, dlogits, grads)
    if sign is None:
        encode_backward(caches[0], dx, grads.buffers, model.table)
    else:
        m = caches[0].rep.shape[1]
        da = dx[:, :m] + sign * dx[:, m : 2 * m]
        db = dx[:, 2 * m :] - sign * dx[:, m : 2 * m]
        encode_backward(caches[0], da, grads.buffers, model.table)
        encode_backward(caches[1], db, grads.buffers, model.table)
    loss = losses.combined_loss(hard, soft, alpha)
    return {"loss": loss, "hard": hard, "soft": soft, "logits": logits}, grads


def classify_eval(model: Model, seqs_a, seqs_b=None) -> np.ndarray:
    """Forward-only class logits (no dropout, no gradients)."""
    batches = [seqs_a] if seqs_b is None else [seqs_a, seqs_b]
    x, _, _ = _pooled_features(model, batches)
    logits, _ = _classifier_forward(model.classifier, x, DropoutPolicy(training=False), None)
    return logits


def mlm_eval_loss(model: Model, sequences, positions, originals) -> float:
    """Forward-only mean MLM cross-entropy over the given target sites."""
    ids, mask = pad_batch(sequences)
    cache = encode_batch(model.table, ids, mask, "per-token")
    tb = np.concatenate([[b] * len(p) for b, p in enumerate(positions)]).astype(np.int64)
    ti = np.concatenate([np.asarray(p, dtype=np.int64) for p in positions])
    tids = np.concatenate([np.asarray(o, dtype=np.int64) for o in originals])
    logits = cache.rep[tb, ti] @ model.mlm_head.weight.T + model.mlm_head.bias
    return losses.hard_loss(logits, tids)


def build_model(
    kind: str,
    d: int,
    d_vec: int,
    n_vocab: int,
    head: str | None = None,
    n_classes: int = 2,
    hidden_dim: int | None = None,
    encoding: str = "joint",
    sigma_init: float = 0.01,
    seed: int = 0,
    precision: str = "narrow",
    dropout: DropoutPolicy | None = None,
) -> Model:
    """Convenience constructor wiring dims between table and heads.

    head: None, 'mlm', 'linear', or 'mlp'.  For classifiers, `encoding`
    decides the input dim (DiffCat triples the pooled dim).
    """
    from .. import encoder as enc
    from .. import heads as heads_mod

    table = embeddings.init(kind, d, d_vec, n_vocab, sigma_init, seed, precision)
    mlm_head = clf = None
    if head == "mlm":
        mlm_head = heads_mod.init_mlm_head(enc.per_token_dim(table), n_vocab, seed + 1, precision)
    elif head in ("linear", "mlp"):
        in_dim = enc.pooled_dim(table)
        if encoding == "diffcat":
            in_dim *= 3
        clf = heads_mod.init_classifier(head, in_dim, n_classes, hidden_dim, seed + 1, precision)
    elif head is not None:
        raise StructuralError(f"unknown head {head!r}")
    return Model(
        table=table,
        mlm_head=mlm_head,
        classifier=clf,
        dropout=dropout if dropout is not None else DropoutPolicy(),
    )
