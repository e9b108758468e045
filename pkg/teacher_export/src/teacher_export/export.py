"""Run a BERT teacher over corpora / task files and emit TDR1 records.

The exporter shares nothing with the student but files: vocab.txt in the
BERT format, the TDR1 record format, corpora (one sequence per line,
blank lines skipped but line ids preserved), task TSVs (header row,
0-based data-row ids), and golden token files (one space-separated id
line per corpus line).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from .masking import line_rng, mask_sequence
from .tdr import write_records

log = logging.getLogger("teacher_export")

SPECIAL_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")


@dataclass
class ExportJob:
    teacher: str  # model name or local directory
    mode: str  # "mlm" | "task"
    input_path: str
    out_path: str
    top_k: int = 128
    mask_seed: int = 0
    mask_fraction: float = 0.15
    temperature: float = 1.0
    max_len: int = 128
    batch_size: int = 32
    columns: dict | None = None  # task mode: {"a": ..., "b": ..., "label": ...}


def load_tokenizer(vocab_path):
    from transformers import BertTokenizer

    tok = BertTokenizer(str(vocab_path), do_lower_case=True)
    for t in SPECIAL_TOKENS:
        if t not in tok.vocab:
            raise SystemExit(f"vocab {vocab_path} is missing special token {t}")
    return tok


def check_teacher_vocab(model, tokenizer, vocab_path):
    n = model.config.vocab_size
    if n != tokenizer.vocab_size:
        raise SystemExit(
            f"teacher vocab_size {n} != vocabulary {vocab_path} size {tokenizer.vocab_size}; "
            "teacher and student must share vocab.txt"
        )


def read_corpus(path):
    """(line_id, text) for nonempty lines, ids = original line numbers."""
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            text = line.rstrip("\n")
            if text.strip():
                yield i, text


def iter_batches(items, size):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def export_mlm(job: ExportJob, vocab_path) -> int:
    """One record per masked site: top-K teacher probabilities at the
    export temperature over the corrupted input."""
    from transformers import AutoModelForMaskedLM

    tok = load_tokenizer(vocab_path)
    model = AutoModelForMaskedLM.from_pretrained(job.teacher)
    model.eval()
    check_teacher_vocab(model, tok, vocab_path)
    n_vocab = tok.vocab_size
    special_ids = frozenset(tok.convert_tokens_to_ids(list(SPECIAL_TOKENS)))
    cls_id, sep_id, mask_id = (tok.convert_tokens_to_ids(t) for t in ("[CLS]", "[SEP]", "[MASK]"))
    pad_id = tok.convert_tokens_to_ids("[PAD]")
    K = min(job.top_k, n_vocab)

    sites = []  # (line_id, corrupted ids, positions)
    for line_id, text in read_corpus(job.input_path):
        ids = tok.encode(text, add_special_tokens=False)
        if not ids:
            continue
        ids = [cls_id, *ids[: job.max_len - 2], sep_id]
        masked = mask_sequence(
            ids, job.mask_fraction, special_ids, mask_id, n_vocab, line_rng(job.mask_seed, line_id)
        )
        if masked is None:
            log.warning("line %d has no maskable tokens; skipped", line_id)
            continue
        corrupted, positions, _ = masked
        sites.append((line_id, corrupted, positions))

    records = []
    with torch.no_grad():
        for chunk in iter_batches(sites, job.batch_size):
            width = max(len(s[1]) for s in chunk)
            input_ids = torch.full((len(chunk), width), pad_id, dtype=torch.long)
            attention = torch.zeros((len(chunk), width), dtype=torch.long)
            for row, (_, corrupted, _) in enumerate(chunk):
                input_ids[row, : len(corrupted)] = torch.tensor(corrupted)
                attention[row, : len(corrupted)] = 1
            logits = model(input_ids=input_ids, attention_mask=attention).logits
            probs = torch.softmax(logits / job.temperature, dim=-1)
            for row, (line_id, _, positions) in enumerate(chunk):
                for pos in positions:
                    top = torch.topk(probs[row, pos], K)
                    records.append(
                        ((line_id, pos), top.indices.numpy().astype(np.uint32), top.values.numpy())
                    )
    write_records(
        job.out_path, "mlm", n_vocab, K, records,
        mask_seed=job.mask_seed, mask_fraction=job.mask_fraction, temperature=job.temperature,
    )
    log.info("wrote %d mlm records to %s", len(records), job.out_path)
    return len(records)


def read_task_rows(path, columns):
    """(row_id, a, b or None, label string); row_id = 0-based data row."""
    rows = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        ia = header.index(columns["a"])
        ib = header.index(columns["b"]) if columns.get("b") else None
        for line_no, line in enumerate(f, start=2):
            text = line.rstrip("\n")
            if not text.strip():
                continue
            fields = text.split("\t")
            a = fields[ia]
            b = fields[ib] if ib is not None else None
            rows.append((line_no - 2, a, b))
    return rows


def export_task(job: ExportJob, vocab_path, n_classes: int) -> int:
    """One record per task row: the fine-tuned teacher's class
    distribution (full support, K = class count)."""
    from transformers import AutoModelForSequenceClassification

    tok = load_tokenizer(vocab_path)
    model = AutoModelForSequenceClassification.from_pretrained(job.teacher)
    model.eval()
    check_teacher_vocab(model, tok, vocab_path)
    if model.config.num_labels != n_classes:
        raise SystemExit(f"teacher has {model.config.num_labels} labels, task declares {n_classes}")
    rows = read_task_rows(job.input_path, job.columns or {"a": "sentence1", "b": None})
    records = []
    with torch.no_grad():
        for chunk in iter_batches(rows, job.batch_size):
            texts_a = [a for _, a, _ in chunk]
            texts_b = [b for _, _, b in chunk]
            if any(b is None for b in texts_b):
                enc = tok(texts_a, padding=True, truncation=True, max_length=job.max_len, return_tensors="pt")
            else:
                enc = tok(texts_a, texts_b, padding=True, truncation=True, max_length=job.max_len, return_tensors="pt")
            logits = model(**enc).logits
            probs = torch.softmax(logits / job.temperature, dim=-1).numpy()
            for (row_id, _, _), p in zip(chunk, probs):
                records.append(((row_id, 0), np.arange(n_classes, dtype=np.uint32), p))
    write_records(job.out_path, "task", n_classes, n_classes, records, temperature=job.temperature)
    log.info("wrote %d task records to %s", len(records), job.out_path)
    return len(records)


def golden_tokens(vocab_path, corpus_path, out_path) -> int:
    """Reference tokenization, one line of space-separated ids per corpus
    line (blank corpus lines produce blank golden lines)."""
    tok = load_tokenizer(vocab_path)
    n = 0
    import os

    tmp = f"{out_path}.tmp.{os.getpid()}"
    with open(corpus_path, encoding="utf-8") as src, open(tmp, "w", encoding="utf-8") as dst:
        for line in src:
            text = line.rstrip("\n")
            ids = tok.encode(text, add_special_tokens=False) if text.strip() else []
            dst.write(" ".join(str(i) for i in ids) + "\n")
            n += 1
    os.replace(tmp, out_path)
    log.info("wrote %d golden lines to %s", n, out_path)
    return n
