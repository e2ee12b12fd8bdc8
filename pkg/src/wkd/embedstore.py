"""Per-document embedding matrices and the EMBv1 binary interchange format.

Layout (little-endian throughout): bytes 0-4 ASCII ``EMBv1``, bytes 5-8
u32 n_docs, bytes 9-12 u32 dim, then n_docs*dim IEEE-754 f32 values in
row-major order. The same layout is produced by the standalone exporter,
so files are interchangeable between real and synthetic embeddings.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .errors import DataError, FormatError
from .nncore import rng

MAGIC = b"EMBv1"
HEADER_SIZE = len(MAGIC) + 8


@dataclass
class EmbeddingMatrix:
    data: np.ndarray  # (n_docs, dim) float32

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError(f"embedding matrix must be 2-D, got shape {self.data.shape}")

    @property
    def n_docs(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]


def write_embeddings(matrix: EmbeddingMatrix, path) -> None:
    path = Path(path)
    payload = matrix.data.astype("<f4", copy=False).tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<II", matrix.n_docs, matrix.dim))
            fh.write(payload)
    except OSError as exc:
        raise DataError(f"cannot write embeddings to {path}: {exc}") from exc


def read_embeddings(path) -> EmbeddingMatrix:
    path = Path(path)
    if not path.exists():
        raise DataError(f"embeddings file not found: {path}")
    blob = path.read_bytes()
    if len(blob) < HEADER_SIZE or blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic, not an EMBv1 file")
    n_docs, dim = struct.unpack_from("<II", blob, len(MAGIC))
    expected = HEADER_SIZE + 4 * n_docs * dim
    if len(blob) != expected:
        raise FormatError(
            f"{path}: truncated or oversized payload, expected {expected} bytes, got {len(blob)}"
        )
    data = np.frombuffer(blob, dtype="<f4", offset=HEADER_SIZE).reshape(n_docs, dim)
    if n_docs * dim and not np.all(np.isfinite(data)):
        raise FormatError(f"{path}: embedding contains NaN or Inf entries")
    return EmbeddingMatrix(data=data.copy())


def synth_embeddings(corpus: Corpus, dim: int, seed: int) -> EmbeddingMatrix:
    """Deterministic stand-in for a sentence encoder.

    Each token maps to a seeded pseudo-random unit vector; a document row is
    the L2-normalized sum over its token multiset. Documents whose vector
    cancels to (near) zero fall back to a fixed seeded unit vector.
    """
    if dim < 1:
        raise ValueError("embedding dim must be >= 1")
    cache: dict[str, np.ndarray] = {}

    def token_vec(tok: str) -> np.ndarray:
        v = cache.get(tok)
        if v is None:
            g = rng.stream(seed, f"synthembed:token:{tok}")
            raw = g.standard_normal(dim)
            v = raw / np.linalg.norm(raw)
            cache[tok] = v
        return v

    fallback_raw = rng.stream(seed, "synthembed:empty").standard_normal(dim)
    fallback = fallback_raw / np.linalg.norm(fallback_raw)

    rows = np.empty((len(corpus), dim), dtype=np.float64)
    for i, doc in enumerate(corpus.documents):
        acc = np.zeros(dim)
        for tok in doc.tokens:
            acc += token_vec(tok)
        norm = np.linalg.norm(acc)
        rows[i] = acc / norm if norm > 1e-12 else fallback
    return EmbeddingMatrix(data=rows.astype(np.float32))
