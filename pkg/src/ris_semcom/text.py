"""Corpus ingestion: tokenization, vocabulary, fixed-length id batches.

Sentences are lowercased and split on whitespace with punctuation broken out
into standalone tokens.  Encoded rows have the fixed layout
``[START, w_1 .. w_k, END, PAD .. PAD]``; ids 0..3 are reserved for
PAD/START/END/UNK and can never collide with corpus tokens (the tokenizer
splits the angle brackets off any literal ``<pad>`` in running text).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

PAD_ID = 0
START_ID = 1
END_ID = 2
UNK_ID = 3
RESERVED_TOKENS = ("<pad>", "<start>", "<end>", "<unk>")
RESERVED_IDS = frozenset((PAD_ID, START_ID, END_ID, UNK_ID))

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase and split into word and punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


class Vocabulary:
    """Bidirectional token/id map with four reserved leading ids."""

    def __init__(self, corpus_tokens: Sequence[str]):
        self.id_to_token: list[str] = list(RESERVED_TOKENS) + list(corpus_tokens)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("vocabulary contains duplicate tokens")

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def id_for(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_for(self, idx: int) -> str:
        return self.id_to_token[idx]

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def save(self, path: str | Path) -> None:
        """Write one token per line; the first four lines are the reserved
        tokens, so a corpus token on line k (zero-based) has id k."""
        Path(path).write_text("\n".join(self.id_to_token) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if tuple(lines[:4]) != RESERVED_TOKENS:
            raise ValueError(f"{path} does not start with the reserved-token header")
        return cls(lines[4:])


def build_vocab(
    sentences: Iterable[str],
    min_freq: int = 1,
    max_size: int | None = None,
) -> Vocabulary:
    """Build a vocabulary from raw sentences.

    Tokens with frequency >= ``min_freq`` are kept, most frequent first with
    lexicographic tie-breaks, truncated to ``max_size`` corpus tokens (the
    total vocabulary is then ``max_size + 4`` including reserved ids).
    """
    counts: Counter[str] = Counter()
    for sentence in sentences:
        counts.update(tokenize(sentence))
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [tok for tok, freq in ranked if freq >= min_freq]
    if max_size is not None:
        kept = kept[:max_size]
    return Vocabulary(kept)


def length_filter(sentences: Iterable[str], min_words: int = 4, max_words: int = 30) -> list[str]:
    """Keep sentences whose token count falls in [min_words, max_words]."""
    kept = []
    for sentence in sentences:
        n = len(tokenize(sentence))
        if min_words <= n <= max_words:
            kept.append(sentence)
    return kept


def encode_sentence(text: str, vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Encode one sentence as ``[START, ids..., END, PAD...]`` of length max_len.

    Out-of-vocabulary words map to UNK.  Sentences longer than ``max_len - 2``
    tokens raise ValueError; the corpus length filter is expected to reject
    them upstream.
    """
    tokens = tokenize(text)
    if len(tokens) > max_len - 2:
        raise ValueError(
            f"sentence with {len(tokens)} tokens does not fit max_len={max_len} "
            f"(needs {len(tokens) + 2} slots)"
        )
    row = np.full(max_len, PAD_ID, dtype=np.int64)
    row[0] = START_ID
    for i, tok in enumerate(tokens):
        row[1 + i] = vocab.id_for(tok)
    row[1 + len(tokens)] = END_ID
    return row


def encode_corpus(sentences: Sequence[str], vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Stack encoded sentences into an (N, max_len) id matrix."""
    if not sentences:
        return np.zeros((0, max_len), dtype=np.int64)
    return np.stack([encode_sentence(s, vocab, max_len) for s in sentences])


def strip_special_ids(ids: Sequence[int]) -> list[int]:
    """Drop PAD/START/END/UNK-reserved structure ids, keeping word ids.

    UNK is kept: it stands for a real (unknown) word, unlike the three
    structural markers.
    """
    return [int(i) for i in ids if int(i) not in (PAD_ID, START_ID, END_ID)]


def decode_ids(ids: Sequence[int], vocab: Vocabulary) -> list[str]:
    """Map ids back to tokens, dropping the structural markers."""
    return [vocab.token_for(i) for i in strip_special_ids(ids)]


@dataclass
class TokenBatch:
    """A batch of fixed-length id rows plus its padding structure.

    ``ids`` is (B, L) int64, ``pad_mask`` is True exactly where ids == PAD,
    ``lengths`` counts the non-PAD entries per row (START and END included).
    """

    ids: np.ndarray
    pad_mask: np.ndarray
    lengths: np.ndarray

    @classmethod
    def from_ids(cls, ids: np.ndarray) -> "TokenBatch":
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2:
            raise ValueError(f"TokenBatch wants a (B, L) id matrix, got shape {ids.shape}")
        pad_mask = ids == PAD_ID
        lengths = np.sum(~pad_mask, axis=1).astype(np.int64)
        return cls(ids=ids, pad_mask=pad_mask, lengths=lengths)

    @property
    def batch_size(self) -> int:
        return self.ids.shape[0]

    @property
    def max_len(self) -> int:
        return self.ids.shape[1]


def make_batches(
    encoded: np.ndarray,
    batch_size: int,
    shuffle_seed: int | None = None,
) -> Iterator[TokenBatch]:
    """Yield TokenBatches covering every row exactly once.

    With a seed, rows are visited in a seeded permutation; the final short
    batch is kept.  Identical seeds give identical batch sequences.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    n = encoded.shape[0]
    order = np.arange(n)
    if shuffle_seed is not None:
        order = np.random.default_rng(shuffle_seed).permutation(n)
    for start in range(0, n, batch_size):
        chunk = encoded[order[start : start + batch_size]]
        yield TokenBatch.from_ids(chunk)


def load_corpus(path: str | Path) -> list[str]:
    """Read a UTF-8, one-sentence-per-line corpus, skipping blank lines."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line for line in lines if line.strip()]
