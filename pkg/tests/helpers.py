"""Shared builders for synthetic vocabularies, corpora, and tasks."""

from __future__ import annotations

import numpy as np

from cmow.tokenizer import SPECIAL_TOKENS, Vocabulary, load_vocab
from cmow.training import PreparedExample

WORDS = [
    "the", "cat", "dog", "mouse", "eats", "chases", "sees", "likes", "big", "small",
    "red", "blue", "fast", "slow", "happy", "sad", "bird", "fish", "tree", "house",
    "river", "stone", "cloud", "light", "dark", "old", "new", "runs", "jumps", "sings",
]


def write_vocab(path, extra_tokens=()) -> None:
    tokens = list(SPECIAL_TOKENS) + WORDS + list(extra_tokens)
    path.write_text("\n".join(tokens) + "\n", encoding="utf-8")


def make_vocab(tmp_path, extra_tokens=()) -> Vocabulary:
    p = tmp_path / "vocab.txt"
    write_vocab(p, extra_tokens)
    return load_vocab(p)


def toy_vocabulary(n_content: int = 50) -> Vocabulary:
    """In-memory vocabulary with synthetic content tokens tok0..tokN."""
    tokens = list(SPECIAL_TOKENS) + [f"tok{i}" for i in range(n_content)]
    return Vocabulary(
        tokens=tokens,
        token_to_id={t: i for i, t in enumerate(tokens)},
        pad_id=0, unk_id=1, cls_id=2, sep_id=3, mask_id=4,
    )


def write_corpus(path, n_lines: int = 200, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as f:
        for _ in range(n_lines):
            n = rng.integers(3, 9)
            f.write(" ".join(rng.choice(WORDS, size=n)) + "\n")


# --- synthetic order-discrimination task -------------------------------
# Class 0: tokens in ascending id order; class 1: the same multiset
# reversed.  Any multiset is equally likely under both labels, so a
# bag-of-words model cannot beat chance while an order-aware one can.

def order_task_examples(
    n: int, n_content: int = 50, seq_len: int = 8, seed: int = 0,
    cls_id: int = 2, sep_id: int = 3, content_base: int = 5,
) -> list[PreparedExample]:
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n):
        toks = np.sort(rng.choice(n_content, size=seq_len, replace=False)) + content_base
        label = int(rng.integers(0, 2))
        inner = toks[::-1] if label == 1 else toks
        rows.append(
            PreparedExample(row_id=i, a=[cls_id, *inner.tolist(), sep_id], b=None, label=label)
        )
    return rows


def write_order_task_tsv(path, n: int, n_content: int = 50, seq_len: int = 8, seed: int = 0) -> None:
    """Same construction but as a text task file over tok<i> words."""
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as f:
        f.write("sentence1\tlabel\n")
        for _ in range(n):
            toks = np.sort(rng.choice(n_content, size=seq_len, replace=False))
            label = int(rng.integers(0, 2))
            inner = toks[::-1] if label == 1 else toks
            words = " ".join(f"tok{t}" for t in inner)
            f.write(f"{words}\t{label}\n")


def write_synthetic_vocab(path, n_content: int = 50) -> None:
    tokens = list(SPECIAL_TOKENS) + [f"tok{i}" for i in range(n_content)]
    path.write_text("\n".join(tokens) + "\n", encoding="utf-8")


# --- synthetic paraphrase task ------------------------------------------
# Label 1: B equals A up to light token noise; label 0: B is unrelated.

def paraphrase_pair(rng, n_content: int, seq_len: int, noise: float):
    a = rng.integers(0, n_content, size=seq_len)
    label = int(rng.integers(0, 2))
    if label == 1:
        b = a.copy()
        flips = rng.random(seq_len) < noise
        b[flips] = rng.integers(0, n_content, size=int(flips.sum()))
    else:
        b = rng.integers(0, n_content, size=seq_len)
    return a, b, label


def write_paraphrase_task_tsv(path, n: int, n_content: int = 50, seq_len: int = 8, noise: float = 0.15, seed: int = 0) -> None:
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as f:
        f.write("sentence1\tsentence2\tlabel\n")
        for _ in range(n):
            a, b, label = paraphrase_pair(rng, n_content, seq_len, noise)
            wa = " ".join(f"tok{t}" for t in a)
            wb = " ".join(f"tok{t}" for t in b)
            f.write(f"{wa}\t{wb}\t{label}\n")
