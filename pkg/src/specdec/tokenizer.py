"""Tokenization: byte-level, whitespace-run, and trained byte-pair vocabularies.

All encoders map byte strings to dense integer token ids. Byte and BPE
encodings round-trip losslessly; unknown words in whitespace mode fall back
to byte decomposition so encoding is total.
"""

from __future__ import annotations

import base64
import json
import re
from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "Vocab",
    "CorpusStats",
    "byte_vocab",
    "word_vocab",
    "train_bpe",
    "encode",
    "decode",
    "corpus_stats",
    "save_vocab",
    "load_vocab",
    "read_corpus",
]

MODES = ("byte", "whitespace", "bpe")

# Maximal runs of whitespace / non-whitespace. Merges never cross a run
# boundary, which keeps token_count >= word_count for subword vocabs.
_RUN_RE = re.compile(rb"\s+|\S+")


@dataclass(frozen=True)
class Vocab:
    """Ordered token table; ids are exactly [0, len(tokens))."""

    tokens: tuple[bytes, ...]
    eos: int | None = None

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate token strings in vocab")
        if self.eos is not None and not (0 <= self.eos < len(self.tokens)):
            raise ValueError(f"eos id {self.eos} out of range for vocab of size {len(self.tokens)}")
        object.__setattr__(self, "_index", {tok: i for i, tok in enumerate(self.tokens)})

    @property
    def size(self) -> int:
        return len(self.tokens)

    def index_of(self, token: bytes) -> int | None:
        return self._index.get(token)  # type: ignore[attr-defined]

    def token(self, token_id: int) -> bytes:
        if not (0 <= token_id < len(self.tokens)):
            raise ValueError(f"token id {token_id} out of range [0, {len(self.tokens)})")
        return self.tokens[token_id]


@dataclass(frozen=True)
class CorpusStats:
    word_count: int
    token_count: int
    ratio: float


def byte_vocab() -> Vocab:
    """Identity byte vocabulary: id i decodes to byte i, plus an eos token."""
    tokens = tuple(bytes([i]) for i in range(256)) + (b"",)
    return Vocab(tokens=tokens, eos=256)


def word_vocab(corpus: bytes) -> Vocab:
    """Vocabulary for whitespace mode: all bytes, then each distinct run of
    the corpus (words and whitespace runs alike), then eos."""
    tokens: list[bytes] = [bytes([i]) for i in range(256)]
    seen = set(tokens)
    for run in _RUN_RE.findall(corpus):
        if run not in seen:
            seen.add(run)
            tokens.append(run)
    tokens.append(b"")
    return Vocab(tokens=tuple(tokens), eos=len(tokens) - 1)


def train_bpe(corpus: bytes, target_vocab_size: int) -> Vocab:
    """Greedy pair-merge training within whitespace-delimited runs.

    Repeatedly merges the most frequent adjacent token pair; ties break to
    the lexicographically smallest merged byte string. Stops early when no
    pair occurs twice. Resulting layout: 256 byte tokens, merged tokens in
    merge order, eos last.
    """
    if not corpus:
        raise ValueError("cannot train a BPE vocab on an empty corpus")
    if target_vocab_size < 257:
        raise ValueError("target_vocab_size must be >= 257 (256 byte tokens + eos)")

    tokens: list[bytes] = [bytes([i]) for i in range(256)]
    existing = set(tokens)
    segments: list[list[bytes]] = [
        [bytes([b]) for b in run] for run in _RUN_RE.findall(corpus)
    ]

    while len(tokens) + 1 < target_vocab_size:
        counts: dict[tuple[bytes, bytes], int] = {}
        for seg in segments:
            for pair in zip(seg, seg[1:]):
                counts[pair] = counts.get(pair, 0) + 1
        best: bytes | None = None
        best_count = 1  # pairs occurring once are not worth a vocab slot
        for (a, b), count in counts.items():
            merged = a + b
            if merged in existing:
                continue
            if count > best_count or (count == best_count and best is not None and merged < best):
                best, best_count = merged, count
        if best is None:
            break
        tokens.append(best)
        existing.add(best)
        for i, seg in enumerate(segments):
            if len(seg) >= 2:
                segments[i] = _merge_run(seg, best)

    tokens.append(b"")
    return Vocab(tokens=tuple(tokens), eos=len(tokens) - 1)


def _merge_run(seg: list[bytes], merged: bytes) -> list[bytes]:
    out: list[bytes] = []
    i = 0
    while i < len(seg):
        if i + 1 < len(seg) and seg[i] + seg[i + 1] == merged:
            out.append(merged)
            i += 2
        else:
            out.append(seg[i])
            i += 1
    return out


def _encode_run_bpe(run: bytes, vocab: Vocab) -> list[int]:
    parts = [bytes([b]) for b in run]
    while len(parts) >= 2:
        # merge the adjacent pair whose concatenation has the smallest id,
        # i.e. the earliest-learned merge
        best_id: int | None = None
        for a, b in zip(parts, parts[1:]):
            mid = vocab.index_of(a + b)
            if mid is not None and (best_id is None or mid < best_id):
                best_id = mid
        if best_id is None:
            break
        parts = _merge_run(parts, vocab.tokens[best_id])
    ids = []
    for p in parts:
        i = vocab.index_of(p)
        if i is None:
            raise ValueError(f"vocab does not cover byte 0x{p[0]:02x}")
        ids.append(i)
    return ids


def _byte_ids(data: bytes, vocab: Vocab) -> list[int]:
    ids = []
    for b in data:
        i = vocab.index_of(bytes([b]))
        if i is None:
            raise ValueError(f"vocab does not cover byte 0x{b:02x}")
        ids.append(i)
    return ids


def encode(text: bytes | str, vocab: Vocab, mode: str = "byte") -> list[int]:
    """Encode a byte string to token ids. Total for byte/bpe modes given a
    vocab that covers all bytes; unknown whitespace-mode words decompose to
    byte tokens."""
    if isinstance(text, str):
        text = text.encode("utf-8")
    if mode not in MODES:
        raise ValueError(f"unknown tokenizer mode {mode!r}; expected one of {MODES}")
    if not text:
        return []
    if mode == "byte":
        return _byte_ids(text, vocab)
    ids: list[int] = []
    for run in _RUN_RE.findall(text):
        if mode == "whitespace":
            whole = vocab.index_of(run)
            if whole is not None:
                ids.append(whole)
            else:
                ids.extend(_byte_ids(run, vocab))
        else:
            ids.extend(_encode_run_bpe(run, vocab))
    return ids


def decode(ids: list[int], vocab: Vocab) -> bytes:
    """Concatenate token strings. Raises on the first invalid id."""
    out = bytearray()
    for pos, token_id in enumerate(ids):
        if not isinstance(token_id, int) or not (0 <= token_id < vocab.size):
            raise ValueError(f"invalid token id {token_id!r} at position {pos}")
        out += vocab.tokens[token_id]
    return bytes(out)


def corpus_stats(corpus: bytes | str, vocab: Vocab, mode: str = "byte") -> CorpusStats:
    """Word count (maximal non-whitespace runs) vs token count under `mode`.
    Ratio is 1.0 by convention when there are no words."""
    if isinstance(corpus, str):
        corpus = corpus.encode("utf-8")
    words = len(corpus.split())
    tokens = len(encode(corpus, vocab, mode))
    ratio = tokens / words if words > 0 else 1.0
    return CorpusStats(word_count=words, token_count=tokens, ratio=ratio)


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    payload = {
        "tokens": [base64.b64encode(tok).decode("ascii") for tok in vocab.tokens],
        "eos": vocab.eos,
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_vocab(path: str | Path) -> Vocab:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(payload, dict) or "tokens" not in payload:
        raise ValueError(f"not a vocab file: {path}")
    tokens = tuple(base64.b64decode(entry) for entry in payload["tokens"])
    return Vocab(tokens=tokens, eos=payload.get("eos"))


def read_corpus(path: str | Path) -> bytes:
    """Read a corpus file, or a directory of files concatenated in
    lexicographic filename order."""
    p = Path(path)
    if p.is_dir():
        chunks = [f.read_bytes() for f in sorted(p.iterdir()) if f.is_file()]
        return b"".join(chunks)
    return p.read_bytes()
