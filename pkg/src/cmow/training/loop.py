"""Epoch loop with early stopping and best-checkpoint restoration, for
both MLM pretraining and classification fine-tuning."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..data_metrics import TaskSpec, evaluate_predictions, selection_value
from ..distillation_io import RecordStore, lookup_record
from ..errors import ConfigError, DataError, NumericalError
from ..tokenizer import Vocabulary
from . import model as model_mod
from .masking import mask_sequence, line_rng
from .model import Model
from .optim import Adam

log = logging.getLogger("cmow")


@dataclass
class TrainConfig:
    alpha: float = 0.5
    temperature: float = 1.0
    lr: float = 1e-3
    warmup_steps: int = 0
    max_epochs: int = 20
    patience: int = 5
    batch_size: int = 32
    mask_fraction: float = 0.15
    mask_seed: int | None = None  # defaults to `seed`
    clip_norm: float = 1.0
    seed: int = 0
    precision: str = "narrow"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.patience > self.max_epochs:
            raise ConfigError(f"patience {self.patience} exceeds max epochs {self.max_epochs}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")

    @property
    def effective_mask_seed(self) -> int:
        return self.seed if self.mask_seed is None else self.mask_seed


class EarlyStopping:
    """Strict-improvement early stopping: stop once `patience` epochs pass
    without a new best value."""

    def __init__(self, patience: int, mode: str = "max"):
        if mode not in ("max", "min"):
            raise ConfigError(f"unknown early-stopping mode {mode!r}")
        self.patience = patience
        self.mode = mode
        self.best_value: float | None = None
        self.best_epoch: int = 0

    def update(self, epoch: int, value: float) -> bool:
        better = (
            self.best_value is None
            or (self.mode == "max" and value > self.best_value)
            or (self.mode == "min" and value < self.best_value)
        )
        if better:
            self.best_value = value
            self.best_epoch = epoch
        return better

    def should_stop(self, epoch: int) -> bool:
        return epoch - self.best_epoch >= self.patience


@dataclass
class TrainResult:
    best_state: dict[str, np.ndarray]
    best_epoch: int
    best_value: float
    stopped_epoch: int
    trace: list[dict] = field(default_factory=list)


@dataclass
class PreparedExample:
    """One classification example, tokenized and special-token framed."""

    row_id: int
    a: list[int]
    b: list[int] | None
    label: int
    score: float | None = None


@dataclass
class TaskData:
    spec: TaskSpec
    train: list[PreparedExample]
    dev: list[PreparedExample]


@dataclass
class MaskedLine:
    """One corpus line with its frozen mask pattern and teacher rows."""

    line_id: int
    masked: list[int]
    positions: list[int]
    originals: list[int]
    teacher_rows: list | None = None


@dataclass
class MlmData:
    train: list[MaskedLine]
    dev: list[MaskedLine]


def prepare_mlm_lines(
    tokenized: list[tuple[int, list[int]]],
    vocab: Vocabulary,
    cfg: TrainConfig,
    teacher: RecordStore | None = None,
) -> list[MaskedLine]:
    """Freeze the mask pattern of every corpus line and prefetch teacher
    rows.  With a teacher store, the store's mask seed/fraction must match
    the config (the pattern is the record key contract)."""
    seed = cfg.effective_mask_seed
    fraction = cfg.mask_fraction
    if teacher is not None and cfg.alpha < 1.0:
        if teacher.mask_seed != seed:
            raise DataError(
                f"teacher records were exported with mask seed {teacher.mask_seed}, run uses {seed}"
            )
        # the wire header stores the fraction as float32
        if abs(teacher.mask_fraction - fraction) > 1e-6:
            raise DataError(
                f"teacher records were exported with mask fraction {teacher.mask_fraction}, run uses {fraction}"
            )
    lines: list[MaskedLine] = []
    for line_id, ids in tokenized:
        result = mask_sequence(list(ids), fraction, vocab, line_rng(seed, line_id))
        if result is None:
            log.warning("line %d has no maskable tokens; skipped", line_id)
            continue
        masked, positions, originals = result
        rows = None
        if teacher is not None and cfg.alpha < 1.0:
            rows = []
            for pos in positions:
                rec = lookup_record(teacher, (line_id, pos))
                if rec is None:
                    raise DataError(f"no teacher record for masked site (line {line_id}, position {pos})")
                rows.append(rec)
        lines.append(MaskedLine(line_id, masked, positions, originals, rows))
    return lines


def _epoch_batches(n: int, batch_size: int, seed: int, epoch: int):
    order = np.random.default_rng([seed, epoch]).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def evaluate_classifier(model: Model, examples: list[PreparedExample], spec: TaskSpec, batch_size: int = 256):
    """Dev-set metrics dict plus mean hard loss (dropout off)."""
    from ..data_metrics import ExampleRow
    from .losses import hard_loss

    preds = []
    total_loss = 0.0
    for start in range(0, len(examples), batch_size):
        chunk = examples[start : start + batch_size]
        seqs_a = [e.a for e in chunk]
        seqs_b = [e.b for e in chunk] if chunk[0].b is not None else None
        logits = model_mod.classify_eval(model, seqs_a, seqs_b)
        preds.extend(np.argmax(logits, axis=1).tolist())
        total_loss += hard_loss(logits, [e.label for e in chunk]) * len(chunk)
    rows = [ExampleRow(id=e.row_id, a="", b=None, label=e.label, score=e.score) for e in examples]
    metrics = evaluate_predictions(spec, preds, rows)
    return metrics, total_loss / len(examples)


def evaluate_mlm(model: Model, lines: list[MaskedLine], batch_size: int = 256) -> float:
    total, count = 0.0, 0
    for start in range(0, len(lines), batch_size):
        chunk = lines[start : start + batch_size]
        n_targets = sum(len(x.positions) for x in chunk)
        loss = model_mod.mlm_eval_loss(
            model,
            [x.masked for x in chunk],
            [x.positions for x in chunk],
            [x.originals for x in chunk],
        )
        total += loss * n_targets
        count += n_targets
    return total / max(count, 1)


def _fit(model: Model, cfg: TrainConfig, n_train: int, run_batch, evaluate, mode: str) -> TrainResult:
    """Shared epoch skeleton: step over shuffled batches, evaluate, track
    the best state, stop after `patience` stale epochs, restore the best."""
    steps_per_epoch = math.ceil(n_train / cfg.batch_size)
    opt = Adam(
        model.parameters(),
        lr=cfg.lr,
        warmup_steps=cfg.warmup_steps,
        total_steps=steps_per_epoch * cfg.max_epochs,
        clip_norm=cfg.clip_norm,
    )
    stopper = EarlyStopping(cfg.patience, mode=mode)
    best_state = model.state_copy()
    trace: list[dict] = []
    stopped = cfg.max_epochs
    rng = np.random.default_rng([cfg.seed, 1_000_003])
    for epoch in range(1, cfg.max_epochs + 1):
        model.dropout.training = True
        epoch_loss, n_batches = 0.0, 0
        for batch_idx in _epoch_batches(n_train, cfg.batch_size, cfg.seed, epoch):
            stats, grads = run_batch(batch_idx, rng)
            if not np.isfinite(stats["loss"]):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            opt.step(grads)
            epoch_loss += stats["loss"]
            n_batches += 1
        model.dropout.training = False
        train_loss = epoch_loss / max(n_batches, 1)
        metric_name, value, dev_loss, dev_records = evaluate()
        trace.append({"epoch": epoch, "split": "train", "metric": "loss", "value": train_loss, "loss": train_loss})
        trace.extend(dev_records)
        if stopper.update(epoch, value):
            best_state = model.state_copy()
        log.info(
            "epoch %d: train loss %.4f, dev %s %.4f (best %.4f @ %d)",
            epoch, train_loss, metric_name, value, stopper.best_value, stopper.best_epoch,
        )
        if stopper.should_stop(epoch):
            stopped = epoch
            break
    model.load_state(best_state)
    return TrainResult(
        best_state=best_state,
        best_epoch=stopper.best_epoch,
        best_value=stopper.best_value,
        stopped_epoch=stopped,
        trace=trace,
    )


def train_classifier(model: Model, data: TaskData, cfg: TrainConfig, teacher: RecordStore | None = None) -> TrainResult:
    """Fine-tune on a prepared task; with a teacher store and alpha < 1
    the soft loss joins in (task-specific distillation)."""
    train = data.train
    use_teacher = teacher is not None and cfg.alpha < 1.0
    if cfg.alpha < 1.0 and teacher is None:
        raise ConfigError("alpha < 1 needs teacher records; pass a store or set alpha = 1")
    teacher_rows = None
    if use_teacher:
        teacher_rows = []
        for e in train:
            rec = lookup_record(teacher, (e.row_id, 0))
            if rec is None:
                raise DataError(f"no teacher record for task row {e.row_id}")
            teacher_rows.append(rec)
    pair = train[0].b is not None

    def run_batch(batch_idx, rng):
        chunk = [train[i] for i in batch_idx]
        return model_mod.classify_step(
            model,
            [e.a for e in chunk],
            [e.b for e in chunk] if pair else None,
            [e.label for e in chunk],
            teacher_rows=[teacher_rows[i] for i in batch_idx] if use_teacher else None,
            alpha=cfg.alpha if use_teacher else 1.0,
            temperature=cfg.temperature,
            rng=rng,
        )

    def evaluate():
        metrics, dev_loss = evaluate_classifier(model, data.dev, data.spec)
        value = selection_value(data.spec, metrics)
        records = [
            {"epoch": None, "split": "dev", "metric": name, "value": v, "loss": dev_loss}
            for name, v in metrics.items()
        ]
        return data.spec.selection, value, dev_loss, records

    result = _fit(model, cfg, len(train), run_batch, _stamp_epochs(evaluate), mode="max")
    return result


def train_mlm(model: Model, data: MlmData, cfg: TrainConfig, teacher: RecordStore | None = None) -> TrainResult:
    """MLM pretraining; with a teacher store and alpha < 1 every masked
    site also matches the teacher's distribution (general distillation)."""
    train = data.train
    use_teacher = teacher is not None and cfg.alpha < 1.0

    def run_batch(batch_idx, rng):
        chunk = [train[i] for i in batch_idx]
        rows = None
        if use_teacher:
            rows = [r for x in chunk for r in x.teacher_rows]
        return model_mod.mlm_step(
            model,
            [x.masked for x in chunk],
            [x.positions for x in chunk],
            [x.originals for x in chunk],
            teacher_rows=rows,
            alpha=cfg.alpha if use_teacher else 1.0,
            temperature=cfg.temperature,
            rng=rng,
        )

    def evaluate():
        dev_loss = evaluate_mlm(model, data.dev if data.dev else data.train)
        records = [{"epoch": None, "split": "dev", "metric": "mlm_loss", "value": dev_loss, "loss": dev_loss}]
        return "mlm_loss", dev_loss, dev_loss, records

    return _fit(model, cfg, len(train), run_batch, _stamp_epochs(evaluate), mode="min")


def _stamp_epochs(evaluate):
    """Fill the epoch field of dev trace records as epochs happen."""
    counter = {"epoch": 0}

    def wrapped():
        counter["epoch"] += 1
        name, value, dev_loss, records = evaluate()
        for r in records:
            r["epoch"] = counter["epoch"]
        return name, value, dev_loss, records

    return wrapped


def train_loop(model: Model, data, cfg: TrainConfig, teacher: RecordStore | None = None) -> TrainResult:
    """Dispatch on the prepared-data type (TaskData or MlmData)."""
    if isinstance(data, TaskData):
        return train_classifier(model, data, cfg, teacher)
    if isinstance(data, MlmData):
        return train_mlm(model, data, cfg, teacher)
    raise ConfigError(f"train_loop cannot handle data of type {type(data).__name__}")
