"""Corpus loading, vocabulary construction, and bag-of-words vectors.

Input is a UTF-8 TSV with columns ``text<TAB>partition[<TAB>label]``.
Preprocessing is deliberately minimal and deterministic: lowercase, drop
non-alphanumeric characters, split on whitespace.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

PARTITIONS = ("train", "validation", "test")

_PARTITION_ALIASES = {
    "train": "train",
    "val": "validation",
    "validation": "validation",
    "test": "test",
}


def preprocess(text: str) -> list[str]:
    """Lowercase, strip non-alphanumeric characters, split on whitespace."""
    lowered = text.lower()
    cleaned = "".join(ch if (ch.isalnum() or ch.isspace()) else "" for ch in lowered)
    return cleaned.split()


@dataclass(frozen=True)
class Document:
    id: int
    tokens: tuple[str, ...]
    partition: str
    label: str | None = None


@dataclass(frozen=True)
class Corpus:
    documents: tuple[Document, ...]

    def __len__(self) -> int:
        return len(self.documents)

    def partition(self, name: str) -> "Corpus":
        return Corpus(documents=tuple(d for d in self.documents if d.partition == name))


@dataclass(frozen=True)
class Vocabulary:
    words: tuple[str, ...]
    index: dict[str, int] = field(compare=False)

    def __len__(self) -> int:
        return len(self.words)

    @classmethod
    def from_words(cls, words) -> "Vocabulary":
        words = tuple(words)
        if len(set(words)) != len(words):
            raise DataError("vocabulary contains duplicate words")
        return cls(words=words, index={w: i for i, w in enumerate(words)})

    def save(self, path) -> None:
        Path(path).write_text("".join(w + "\n" for w in self.words), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls.from_words([ln for ln in lines if ln])


@dataclass
class BowVector:
    counts: np.ndarray
    normalized: bool


def load_tsv(path) -> Corpus:
    """Parse a TSV corpus file; one Document per non-blank line, in file order."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"corpus file not found: {path}")
    docs: list[Document] = []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            cols = line.split("\t")
            if len(cols) < 2 or len(cols) > 3:
                raise DataError(
                    f"{path}:{lineno}: expected 'text<TAB>partition[<TAB>label]', "
                    f"got {len(cols)} column(s)"
                )
            text, part_token = cols[0], cols[1].strip().lower()
            label = cols[2].strip() if len(cols) == 3 and cols[2].strip() else None
            partition = _PARTITION_ALIASES.get(part_token)
            if partition is None:
                raise DataError(f"{path}:{lineno}: unknown partition {cols[1]!r}")
            tokens = preprocess(text)
            if not tokens:
                raise DataError(f"{path}:{lineno}: document is empty after preprocessing")
            docs.append(Document(id=len(docs), tokens=tuple(tokens), partition=partition, label=label))
    if not docs:
        raise DataError(f"empty corpus: {path}")
    return Corpus(documents=tuple(docs))


def build_vocab(corpus: Corpus, size: int) -> Vocabulary:
    """The `size` most frequent train-partition words; ties broken lexicographically."""
    if len(corpus) == 0:
        raise DataError("cannot build vocabulary from an empty corpus")
    if size < 1:
        raise ValueError("vocabulary size must be >= 1")
    freq: Counter[str] = Counter()
    for doc in corpus.documents:
        if doc.partition == "train":
            freq.update(doc.tokens)
    if not freq:
        raise DataError("corpus has no train-partition documents")
    ranked = sorted(freq.items(), key=lambda kv: (-kv[1], kv[0]))
    return Vocabulary.from_words(w for w, _ in ranked[:size])


def bow_vectorize(doc: Document, vocab: Vocabulary, normalize: bool) -> BowVector:
    """Count in-vocabulary tokens; out-of-vocab tokens are dropped silently."""
    counts = np.zeros(len(vocab), dtype=np.float64)
    index = vocab.index
    for tok in doc.tokens:
        i = index.get(tok)
        if i is not None:
            counts[i] += 1.0
    if normalize:
        total = counts.sum()
        if total > 0:
            counts /= total
    return BowVector(counts=counts, normalized=normalize)


def bow_matrix(corpus: Corpus, vocab: Vocabulary, normalize: bool = False) -> np.ndarray:
    """Stacked BoW rows for every document, aligned with corpus order."""
    if not corpus.documents:
        return np.zeros((0, len(vocab.words)))
    return np.stack([bow_vectorize(d, vocab, normalize).counts for d in corpus.documents])
