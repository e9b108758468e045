"""Operator surface: pretrain / finetune / encode / eval / bench /
inspect-checkpoint.

Every command reads a flat `key = value` config file, applies command-line
overrides, validates referenced paths up front, and echoes the fully
resolved config into the run directory so reruns are reproducible.  Exit
codes: 0 ok, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from . import data_metrics as dm
from . import distillation_io as dio
from . import embeddings, encoder, heads, tokenizer
from .errors import ConfigError, DataError, NumericalError, StructuralError
from .training import (
    MlmData,
    Model,
    PreparedExample,
    TaskData,
    TrainConfig,
    encode_pooled_nograd,
    evaluate_classifier,
    prepare_mlm_lines,
    train_classifier,
    train_mlm,
)

log = logging.getLogger("cmow")


@dataclass
class RunConfig:
    """Merged view of model dims, training knobs, and paths."""

    # model
    kind: str = "hybrid-bidirectional"
    d: int = 20
    d_vec: int = 400
    n_vocab: int = 0  # 0 = take from vocab file
    sigma_init: float = 0.01
    head: str = "mlp"  # linear | mlp
    hidden_dim: int = 0  # 0 = same as classifier input dim
    encoding: str = "joint"  # joint | diffcat
    # training
    alpha: float = 0.5
    temperature: float = 1.0
    lr: float = 1e-3
    warmup_steps: int = 0
    max_epochs: int = 20
    patience: int = 5
    batch_size: int = 32
    mask_fraction: float = 0.15
    mask_seed: int = -1  # -1 = use seed
    clip_norm: float = 1.0
    seed: int = 0
    precision: str = "narrow"
    dropout_embed: float = 0.1
    dropout_hidden: float = 0.2
    max_len: int = 128
    threads: int = 0  # 0 = leave BLAS pools alone
    strict: bool = True
    # paths
    vocab: str = ""
    corpus: str = ""
    dev_corpus: str = ""
    train_tsv: str = ""
    dev_tsv: str = ""
    teacher: str = ""
    init: str = "random"
    out: str = "run"
    # task
    task_name: str = "task"
    task_arity: str = "single"
    task_label_kind: str = "classes"
    task_n_classes: int = 2
    task_lo: float = 0.0
    task_hi: float = 5.0
    task_width: float = 0.2
    task_metrics: str = "accuracy"  # comma-separated
    task_selection: str = "accuracy"
    col_a: str = "sentence1"
    col_b: str = "sentence2"
    col_label: str = "label"
    # encode
    encode_mode: str = "pooled"  # pooled | per-token
    # bench
    bench_batches: int = 1024
    bench_batch_size: int = 256
    bench_seq_len: int = 64

    def to_file_text(self) -> str:
        lines = [f"{KEY_BY_FIELD[f.name]} = {getattr(self, f.name)}" for f in dataclasses.fields(self)]
        return "\n".join(lines) + "\n"


# config-file key <-> dataclass field
KEY_BY_FIELD = {
    f.name: f.name.replace("task_", "task.", 1) if f.name.startswith("task_")
    else f.name.replace("col_", "columns.", 1) if f.name.startswith("col_")
    else f.name.replace("bench_", "bench.", 1) if f.name.startswith("bench_")
    else f.name.replace("encode_", "encode.", 1) if f.name.startswith("encode_")
    else f.name
    for f in dataclasses.fields(RunConfig)
}
FIELD_BY_KEY = {v: k for k, v in KEY_BY_FIELD.items()}


def _parse_value(field_name: str, raw: str):
    ftype = {f.name: f.type for f in dataclasses.fields(RunConfig)}[field_name]
    raw = raw.strip()
    try:
        if ftype == "bool":
            if raw.lower() in ("true", "1", "yes"):
                return True
            if raw.lower() in ("false", "0", "no"):
                return False
            raise ValueError(f"not a bool: {raw!r}")
        if ftype == "int":
            return int(raw)
        if ftype == "float":
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigError(f"bad value for {KEY_BY_FIELD[field_name]}: {e}") from None


def load_config(path: str | None, overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if path:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {path}")
        for line_no, line in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
            key, raw = (s.strip() for s in line.split("=", 1))
            if key not in FIELD_BY_KEY:
                raise ConfigError(f"{path}:{line_no}: unknown config key {key!r}")
            fname = FIELD_BY_KEY[key]
            setattr(cfg, fname, _parse_value(fname, raw))
    for fname, value in overrides.items():
        if value is not None:
            setattr(cfg, fname, value)
    return cfg


def _apply_threads(n: int) -> None:
    if n <= 0:
        return
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        log.warning("threadpoolctl not available; --threads %d ignored", n)


def _require_file(path: str, what: str) -> str:
    if not path:
        raise ConfigError(f"missing required path: {what}")
    if not Path(path).is_file():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _prepare_out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.resolved").write_text(cfg.to_file_text(), encoding="utf-8")
    return out


def _train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(
        alpha=cfg.alpha,
        temperature=cfg.temperature,
        lr=cfg.lr,
        warmup_steps=cfg.warmup_steps,
        max_epochs=cfg.max_epochs,
        patience=cfg.patience,
        batch_size=cfg.batch_size,
        mask_fraction=cfg.mask_fraction,
        mask_seed=None if cfg.mask_seed < 0 else cfg.mask_seed,
        clip_norm=cfg.clip_norm,
        seed=cfg.seed,
        precision=cfg.precision,
    )


def _dropout(cfg: RunConfig) -> heads.DropoutPolicy:
    return heads.DropoutPolicy(p_embed=cfg.dropout_embed, p_hidden=cfg.dropout_hidden, training=False)


def _load_vocab(cfg: RunConfig) -> tokenizer.Vocabulary:
    vocab = tokenizer.load_vocab(_require_file(cfg.vocab, "vocab"))
    if cfg.n_vocab and cfg.n_vocab != vocab.n_vocab:
        raise ConfigError(f"config n_vocab {cfg.n_vocab} != vocab file size {vocab.n_vocab}")
    return vocab


def _init_table(cfg: RunConfig, n_vocab: int) -> embeddings.EmbeddingTable:
    """Fresh or checkpoint-loaded embedding table per --init."""
    if cfg.init == "random":
        return embeddings.init(
            cfg.kind, cfg.d, cfg.d_vec, n_vocab, cfg.sigma_init, cfg.seed, cfg.precision
        )
    table, _, _ = ckpt.load_checkpoint(_require_file(cfg.init, "init checkpoint"), cfg.precision)
    if table.kind != cfg.kind or table.d != cfg.d or table.d_vec != cfg.d_vec:
        raise StructuralError(
            f"checkpoint is {table.kind} d={table.d} d_vec={table.d_vec}, "
            f"config wants {cfg.kind} d={cfg.d} d_vec={cfg.d_vec}"
        )
    if table.n_vocab != n_vocab:
        raise StructuralError(f"checkpoint n_vocab {table.n_vocab} != vocab size {n_vocab}")
    return table


def _task_spec(cfg: RunConfig) -> dm.TaskSpec:
    return dm.TaskSpec(
        name=cfg.task_name,
        arity=cfg.task_arity,
        label_kind=cfg.task_label_kind,
        n_classes=cfg.task_n_classes,
        lo=cfg.task_lo,
        hi=cfg.task_hi,
        width=cfg.task_width,
        metrics=tuple(m.strip() for m in cfg.task_metrics.split(",") if m.strip()),
        selection=cfg.task_selection,
    )


def _prepare_rows(rows, vocab, cfg: RunConfig) -> list[PreparedExample]:
    """Tokenize task rows into model inputs per the two-sequence scheme.
    DiffCat on a single-sentence task reduces to the plain pooled form."""
    scheme = "separate" if cfg.encoding == "diffcat" else "joint"
    prepared = []
    for row in rows:
        a = tokenizer.tokenize(row.a, vocab)
        b = tokenizer.tokenize(row.b, vocab) if row.b is not None else None
        built = tokenizer.build_model_input(a, b, scheme, vocab, cfg.max_len)
        if len(built) == 2:
            prepared.append(
                PreparedExample(row_id=row.id, a=built[0].ids, b=built[1].ids, label=row.label, score=row.score)
            )
        else:
            prepared.append(
                PreparedExample(row_id=row.id, a=built[0].ids, b=None, label=row.label, score=row.score)
            )
    return prepared


def _write_trace(out: Path, trace: list[dict]) -> None:
    with open(out / "trace.jsonl", "w", encoding="utf-8") as f:
        for record in trace:
            f.write(json.dumps(record) + "\n")


def cmd_pretrain(cfg: RunConfig) -> int:
    vocab = _load_vocab(cfg)
    _require_file(cfg.corpus, "corpus")
    out = _prepare_out(cfg)
    teacher = None
    if cfg.teacher:
        teacher = dio.load_records(_require_file(cfg.teacher, "teacher records"), "mlm")
        if teacher.n != vocab.n_vocab:
            raise DataError(f"teacher records n_vocab {teacher.n} != vocab size {vocab.n_vocab}")
    elif cfg.alpha < 1.0:
        log.warning("no teacher records given; forcing alpha from %.2f to 1.0", cfg.alpha)
        cfg.alpha = 1.0
    tcfg = _train_config(cfg)

    def load_lines(path):
        lines = []
        for line_id, text in dm.read_corpus(path):
            toks = tokenizer.tokenize(text, vocab)
            if not toks.ids:
                continue
            built = tokenizer.build_model_input(toks, None, "joint", vocab, cfg.max_len)
            lines.append((line_id, built[0].ids))
        return lines

    train_lines = prepare_mlm_lines(load_lines(cfg.corpus), vocab, tcfg, teacher)
    dev_lines = []
    if cfg.dev_corpus:
        dev_lines = prepare_mlm_lines(load_lines(_require_file(cfg.dev_corpus, "dev corpus")), vocab, tcfg, teacher)
    if not train_lines:
        raise DataError(f"{cfg.corpus}: no trainable lines")

    table = _init_table(cfg, vocab.n_vocab)
    model = Model(
        table=table,
        mlm_head=heads.init_mlm_head(encoder.per_token_dim(table), vocab.n_vocab, cfg.seed + 1, cfg.precision),
        dropout=_dropout(cfg),
    )
    result = train_mlm(model, MlmData(train=train_lines, dev=dev_lines), tcfg, teacher)
    ckpt.save_checkpoint(out / "checkpoint.cmow", model.table, mlm_head=model.mlm_head)
    _write_trace(out, result.trace)
    print(f"pretrain done: best dev mlm_loss {result.best_value:.4f} at epoch {result.best_epoch}")
    print(f"checkpoint: {out / 'checkpoint.cmow'}")
    return 0


def cmd_finetune(cfg: RunConfig) -> int:
    vocab = _load_vocab(cfg)
    spec = _task_spec(cfg)
    columns = {"a": cfg.col_a, "b": cfg.col_b, "label": cfg.col_label}
    train_rows = dm.read_task_tsv(_require_file(cfg.train_tsv, "task train TSV"), spec, columns, cfg.strict)
    dev_rows = dm.read_task_tsv(_require_file(cfg.dev_tsv, "task dev TSV"), spec, columns, cfg.strict)
    if not train_rows or not dev_rows:
        raise DataError("empty train or dev task file")
    out = _prepare_out(cfg)
    teacher = None
    if cfg.teacher:
        teacher = dio.load_records(_require_file(cfg.teacher, "teacher records"), "task")
        if teacher.n != spec.n_classes:
            raise DataError(f"teacher records have {teacher.n} classes, task has {spec.n_classes}")
    elif cfg.alpha < 1.0:
        log.warning("no teacher records given; forcing alpha from %.2f to 1.0", cfg.alpha)
        cfg.alpha = 1.0
    tcfg = _train_config(cfg)

    table = _init_table(cfg, vocab.n_vocab)
    in_dim = encoder.pooled_dim(table)
    if cfg.encoding == "diffcat" and spec.arity == "pair":
        in_dim *= 3
    clf = heads.init_classifier(
        cfg.head, in_dim, spec.n_classes, cfg.hidden_dim or None, cfg.seed + 1, cfg.precision
    )
    model = Model(table=table, classifier=clf, dropout=_dropout(cfg))

    data = TaskData(
        spec=spec,
        train=_prepare_rows(train_rows, vocab, cfg),
        dev=_prepare_rows(dev_rows, vocab, cfg),
    )
    result = train_classifier(model, data, tcfg, teacher)
    ckpt.save_checkpoint(out / "checkpoint.cmow", model.table, classifier=model.classifier)
    _write_trace(out, result.trace)
    metrics, dev_loss = evaluate_classifier(model, data.dev, spec)
    with open(out / "dev_metrics.json", "w", encoding="utf-8") as f:
        json.dump({"metrics": metrics, "dev_loss": dev_loss, "best_epoch": result.best_epoch}, f, indent=2)
    print(f"finetune done: best epoch {result.best_epoch}, stopped after epoch {result.stopped_epoch}")
    for name, value in metrics.items():
        print(f"dev {name}: {value:.4f}")
    return 0


def cmd_encode(cfg: RunConfig, input_path: str) -> int:
    vocab = _load_vocab(cfg)
    _require_file(input_path, "input file")
    out = _prepare_out(cfg)
    table = _init_table(cfg, vocab.n_vocab)
    rows = []
    rows_per_line = []
    with open(input_path, encoding="utf-8") as f:
        for line in f:
            toks = tokenizer.tokenize(line.rstrip("\n"), vocab)
            built = tokenizer.build_model_input(toks, None, "joint", vocab, cfg.max_len)
            if cfg.encode_mode == "pooled":
                enc = encoder.encode_pooled(built[0].ids, table)
                rows.append(np.asarray(enc.data, dtype="<f4"))
                rows_per_line.append(1)
            else:
                enc = encoder.encode_per_token(built[0].ids, table)
                rows.extend(np.asarray(r, dtype="<f4") for r in enc.data)
                rows_per_line.append(len(enc.data))
    if not rows:
        raise DataError(f"{input_path}: no lines to encode")
    data = np.stack(rows)
    bin_path = out / "encodings.f32"
    data.tofile(bin_path)
    sidecar = {
        "kind": cfg.kind,
        "d": cfg.d,
        "d_vec": cfg.d_vec,
        "mode": cfg.encode_mode,
        "row_dim": int(data.shape[1]),
        "rows": int(data.shape[0]),
        "dtype": "float32-little-endian",
    }
    if cfg.encode_mode == "per-token":
        sidecar["rows_per_line"] = rows_per_line
    with open(out / "encodings.json", "w", encoding="utf-8") as f:
        json.dump(sidecar, f, indent=2)
    print(f"wrote {data.shape[0]} rows of dim {data.shape[1]} to {bin_path}")
    return 0


def cmd_eval(cfg: RunConfig) -> int:
    vocab = _load_vocab(cfg)
    spec = _task_spec(cfg)
    columns = {"a": cfg.col_a, "b": cfg.col_b, "label": cfg.col_label}
    dev_rows = dm.read_task_tsv(_require_file(cfg.dev_tsv, "task dev TSV"), spec, columns, cfg.strict)
    out = _prepare_out(cfg)
    table, _, clf = ckpt.load_checkpoint(_require_file(cfg.init, "checkpoint"), cfg.precision)
    if clf is None:
        raise StructuralError(f"checkpoint {cfg.init} has no classifier head")
    expected = encoder.pooled_dim(table)
    if cfg.encoding == "diffcat" and spec.arity == "pair":
        expected *= 3
    if clf.in_dim != expected:
        raise StructuralError(
            f"classifier input dim {clf.in_dim} != encoder output dim {expected} "
            f"({table.kind}, encoding={cfg.encoding})"
        )
    model = Model(table=table, classifier=clf, dropout=_dropout(cfg))
    data = _prepare_rows(dev_rows, vocab, cfg)
    metrics, dev_loss = evaluate_classifier(model, data, spec)
    payload = {"metrics": metrics, "dev_loss": dev_loss, "n_examples": len(data)}
    with open(out / "eval.json", "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
    print(json.dumps(payload, indent=2))
    return 0


def run_benchmark(
    table: embeddings.EmbeddingTable,
    batches: int,
    batch_size: int,
    seq_len: int,
    seed: int = 0,
    head_params: int = 0,
):
    """Time forward-only pooled encoding over pre-generated random id
    batches (tokenization and I/O excluded); returns a report dict."""
    rng = np.random.default_rng(seed)
    batch_ids = [rng.integers(0, table.n_vocab, size=(batch_size, seq_len)) for _ in range(batches)]
    encode_pooled_nograd(table, batch_ids[0])  # warmup
    t0 = time.perf_counter()
    for ids in batch_ids:
        encode_pooled_nograd(table, ids)
    wall = time.perf_counter() - t0
    n_sentences = batches * batch_size
    emb_params = embeddings.parameter_count(table)
    return {
        "kind": table.kind,
        "d": table.d,
        "d_vec": table.d_vec,
        "n_vocab": table.n_vocab,
        "batches": batches,
        "batch_size": batch_size,
        "seq_len": seq_len,
        "wall_seconds": wall,
        "sentences_per_second": n_sentences / wall,
        "params_embeddings": emb_params,
        "params_head": head_params,
        "params_total": emb_params + head_params,
    }


def cmd_bench(cfg: RunConfig) -> int:
    out = _prepare_out(cfg)
    n_vocab = cfg.n_vocab
    if cfg.vocab:
        n_vocab = tokenizer.load_vocab(cfg.vocab).n_vocab
    if n_vocab <= 0:
        n_vocab = 30522
    table = embeddings.init(cfg.kind, cfg.d, cfg.d_vec, n_vocab, cfg.sigma_init, cfg.seed, "narrow")
    report = run_benchmark(table, cfg.bench_batches, cfg.bench_batch_size, cfg.bench_seq_len, cfg.seed)
    cols = list(report.keys())
    with open(out / "bench.csv", "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=cols)
        writer.writeheader()
        writer.writerow(report)
    width = max(len(c) for c in cols)
    for c in cols:
        v = report[c]
        print(f"{c:<{width}}  {v:.1f}" if isinstance(v, float) else f"{c:<{width}}  {v}")
    return 0


def cmd_inspect(path: str) -> int:
    table, mlm_head, clf = ckpt.load_checkpoint(_require_file(path, "checkpoint"), "narrow")
    print(f"kind:        {table.kind}")
    print(f"d:           {table.d}")
    print(f"d_vec:       {table.d_vec}")
    print(f"n_vocab:     {table.n_vocab}")
    print(f"dirs:        {table.dirs}")
    print(f"emb params:  {embeddings.parameter_count(table)}")
    if mlm_head is not None:
        print(f"mlm head:    in_dim={mlm_head.in_dim}, params={mlm_head.parameter_count()}")
    if clf is not None:
        print(
            f"classifier:  {clf.variant}, in_dim={clf.in_dim}, classes={clf.n_classes}, "
            f"params={clf.parameter_count()}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cmow", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", default=None, help="key = value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=None)
        p.add_argument("--precision", choices=("wide", "narrow"), default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--temperature", type=float, default=None)
        p.add_argument("--encoding", choices=("joint", "diffcat"), default=None)
        p.add_argument("--init", default=None, help="'random' or a checkpoint path")
        p.add_argument("--teacher", default=None, help="TDR1 teacher-record file")
        p.add_argument("--out", default=None, help="run directory")
        p.add_argument("--vocab", default=None)
        return p

    add_common(sub.add_parser("pretrain", help="MLM pretraining (optionally distilled)"))
    add_common(sub.add_parser("finetune", help="task fine-tuning (optionally distilled)"))
    enc = add_common(sub.add_parser("encode", help="encode a text file to float32 rows"))
    enc.add_argument("input", help="text file, one sequence per line")
    add_common(sub.add_parser("eval", help="evaluate a checkpoint on a task dev set"))
    bench = add_common(sub.add_parser("bench", help="inference throughput report"))
    bench.add_argument("--batches", type=int, default=None)
    bench.add_argument("--batch-size", type=int, default=None)
    bench.add_argument("--seq-len", type=int, default=None)
    insp = sub.add_parser("inspect-checkpoint", help="print checkpoint header and sizes")
    insp.add_argument("path")
    return parser


_OVERRIDE_FIELDS = {
    "seed": "seed",
    "threads": "threads",
    "precision": "precision",
    "alpha": "alpha",
    "temperature": "temperature",
    "encoding": "encoding",
    "init": "init",
    "teacher": "teacher",
    "out": "out",
    "vocab": "vocab",
    "batches": "bench_batches",
    "batch_size": "bench_batch_size",
    "seq_len": "bench_seq_len",
}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("CMOW_LOG", "WARNING").upper(), format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "inspect-checkpoint":
            return cmd_inspect(args.path)
        overrides = {
            field: getattr(args, cli_name)
            for cli_name, field in _OVERRIDE_FIELDS.items()
            if hasattr(args, cli_name)
        }
        cfg = load_config(args.config, overrides)
        _apply_threads(cfg.threads)
        if args.command == "pretrain":
            return cmd_pretrain(cfg)
        if args.command == "finetune":
            return cmd_finetune(cfg)
        if args.command == "encode":
            return cmd_encode(cfg, args.input)
        if args.command == "eval":
            return cmd_eval(cfg)
        if args.command == "bench":
            return cmd_bench(cfg)
        raise ConfigError(f"unknown command {args.command}")
    except (ConfigError, StructuralError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3
    except NumericalError as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
