"""WordPiece tokenization compatible with BERT-uncased vocabularies.

The pipeline mirrors the reference BERT tokenizer so that ids produced
here are interchangeable with ids produced by a teacher model sharing the
same vocab.txt: text cleanup, lowercasing with accent stripping,
punctuation splitting, then greedy longest-match-first WordPiece with the
"##" continuation prefix.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field

from .errors import ConfigError, StructuralError

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)

MAX_WORD_CHARS = 100  # words longer than this map to [UNK]


@dataclass
class Vocabulary:
    """Token strings indexed by position in the vocab file."""

    tokens: list[str]
    token_to_id: dict[str, int] = field(repr=False)
    pad_id: int
    unk_id: int
    cls_id: int
    sep_id: int
    mask_id: int

    @property
    def n_vocab(self) -> int:
        return len(self.tokens)

    @property
    def special_ids(self) -> frozenset[int]:
        return frozenset((self.pad_id, self.unk_id, self.cls_id, self.sep_id, self.mask_id))


@dataclass
class TokenizedSequence:
    """Token ids for one input; `boundary` marks the start of segment B in
    a joint two-sequence encoding (None otherwise)."""

    ids: list[int]
    boundary: int | None = None

    def __len__(self) -> int:
        return len(self.ids)


def load_vocab(path) -> Vocabulary:
    """Load a BERT-format vocab.txt (one token per line, id = line number)."""
    tokens: list[str] = []
    token_to_id: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            token = line.rstrip("\n").rstrip("\r")
            if token in token_to_id:
                raise ConfigError(f"duplicate token {token!r} at line {i} of {path}")
            token_to_id[token] = i
            tokens.append(token)
    missing = [t for t in SPECIAL_TOKENS if t not in token_to_id]
    if missing:
        raise ConfigError(f"vocab {path} is missing special tokens: {missing}")
    return Vocabulary(
        tokens=tokens,
        token_to_id=token_to_id,
        pad_id=token_to_id[PAD],
        unk_id=token_to_id[UNK],
        cls_id=token_to_id[CLS],
        sep_id=token_to_id[SEP],
        mask_id=token_to_id[MASK],
    )


def _is_whitespace(ch: str) -> bool:
    if ch in (" ", "\t", "\n", "\r"):
        return True
    return unicodedata.category(ch) == "Zs"


def _is_control(ch: str) -> bool:
    if ch in ("\t", "\n", "\r"):
        return False
    return unicodedata.category(ch).startswith("C")


def _is_punctuation(ch: str) -> bool:
    cp = ord(ch)
    # ASCII blocks treated as punctuation by BERT even where Unicode
    # disagrees (e.g. $, ^, `).
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def _is_cjk(cp: int) -> bool:
    return (
        0x4E00 <= cp <= 0x9FFF
        or 0x3400 <= cp <= 0x4DBF
        or 0x20000 <= cp <= 0x2A6DF
        or 0x2A700 <= cp <= 0x2B73F
        or 0x2B740 <= cp <= 0x2B81F
        or 0x2B820 <= cp <= 0x2CEAF
        or 0xF900 <= cp <= 0xFAFF
        or 0x2F800 <= cp <= 0x2FA1F
    )


def _clean_text(text: str) -> str:
    out = []
    for ch in text:
        cp = ord(ch)
        if cp == 0 or cp == 0xFFFD or _is_control(ch):
            continue
        out.append(" " if _is_whitespace(ch) else ch)
    return "".join(out)


def _space_cjk(text: str) -> str:
    out = []
    for ch in text:
        if _is_cjk(ord(ch)):
            out.append(f" {ch} ")
        else:
            out.append(ch)
    return "".join(out)


def _strip_accents(text: str) -> str:
    return "".join(ch for ch in unicodedata.normalize("NFD", text) if unicodedata.category(ch) != "Mn")


def _split_on_punc(token: str) -> list[str]:
    pieces: list[str] = []
    current: list[str] = []
    for ch in token:
        if _is_punctuation(ch):
            if current:
                pieces.append("".join(current))
                current = []
            pieces.append(ch)
        else:
            current.append(ch)
    if current:
        pieces.append("".join(current))
    return pieces


def basic_tokenize(text: str) -> list[str]:
    """Lowercase, strip accents, and split on whitespace and punctuation."""
    text = _space_cjk(_clean_text(text))
    words: list[str] = []
    for token in text.split():
        token = _strip_accents(token.lower())
        words.extend(_split_on_punc(token))
    return [w for w in " ".join(words).split() if w]


def wordpiece(word: str, vocab: Vocabulary) -> list[str]:
    """Greedy longest-match-first subword split of a single word."""
    if len(word) > MAX_WORD_CHARS:
        return [UNK]
    pieces: list[str] = []
    start = 0
    while start < len(word):
        end = len(word)
        match = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = "##" + piece
            if piece in vocab.token_to_id:
                match = piece
                break
            end -= 1
        if match is None:
            return [UNK]
        pieces.append(match)
        start = end
    return pieces


def tokenize(text: str, vocab: Vocabulary) -> TokenizedSequence:
    """Full pipeline: basic tokenization followed by WordPiece; total
    function, unknown words map to [UNK]."""
    ids: list[int] = []
    for word in basic_tokenize(text):
        for piece in wordpiece(word, vocab):
            ids.append(vocab.token_to_id[piece])
    return TokenizedSequence(ids=ids)


def _truncate_pair(a: list[int], b: list[int], budget: int) -> tuple[list[int], list[int]]:
    """Trim the longer sequence first (from the end) until the pair fits."""
    a, b = list(a), list(b)
    while len(a) + len(b) > budget:
        if len(a) >= len(b):
            a.pop()
        else:
            b.pop()
    return a, b


def build_model_input(
    a: TokenizedSequence,
    b: TokenizedSequence | None,
    scheme: str,
    vocab: Vocabulary,
    max_len: int = 128,
) -> tuple[TokenizedSequence, ...]:
    """Add special tokens and combine one or two tokenized sequences.

    joint:    ([CLS] a [SEP] b [SEP],)           -- one sequence
    separate: ([CLS] a [SEP], [CLS] b [SEP])     -- two sequences

    Single-sentence inputs (b is None) produce ([CLS] a [SEP],) under
    either scheme. Sequences are truncated to max_len, trimming the longer
    of a/b first.
    """
    if scheme not in ("joint", "separate"):
        raise StructuralError(f"unknown two-sequence scheme {scheme!r}")
    if len(a.ids) == 0:
        raise StructuralError("sequence A must be nonempty")
    cls_id, sep_id = vocab.cls_id, vocab.sep_id
    if b is None or len(b.ids) == 0:
        ids = a.ids[: max_len - 2]
        return (TokenizedSequence(ids=[cls_id, *ids, sep_id]),)
    if scheme == "joint":
        a_ids, b_ids = _truncate_pair(a.ids, b.ids, max_len - 3)
        joint = [cls_id, *a_ids, sep_id, *b_ids, sep_id]
        return (TokenizedSequence(ids=joint, boundary=len(a_ids) + 2),)
    a_ids = a.ids[: max_len - 2]
    b_ids = b.ids[: max_len - 2]
    return (
        TokenizedSequence(ids=[cls_id, *a_ids, sep_id]),
        TokenizedSequence(ids=[cls_id, *b_ids, sep_id]),
    )
