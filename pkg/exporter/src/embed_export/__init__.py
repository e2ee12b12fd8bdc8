"""Export contextual document embeddings to the EMBv1 binary format.

Reads a corpus TSV (``text<TAB>partition[<TAB>label]``), encodes the raw
text column with a pretrained sentence encoder, and writes one float32 row
per corpus line: the 13-byte header ``b"EMBv1"`` + little-endian uint32
document count + little-endian uint32 dimension, followed by the row-major
float32 payload. A sidecar ``<out>.meta`` records the encoder provenance.

Files are written atomically (same-directory temp file + rename), so an
aborted export never leaves a partial output behind.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"EMBv1"
HEADER_SIZE = 13
SIDECAR_SUFFIX = ".meta"


class ConfigError(ValueError):
    """Unusable invocation: unknown preset, bad batch size, missing input path."""


class DataError(ValueError):
    """The corpus or the encoder output cannot produce a valid file."""


class EncoderError(RuntimeError):
    """The encoder preset could not be loaded or failed during inference."""


@dataclass(frozen=True)
class EncoderPreset:
    key: str
    model_name: str
    dim: int


PRESETS = {
    "teacher": EncoderPreset(
        "teacher", "sentence-transformers/paraphrase-distilroberta-base-v2", 768),
    "student": EncoderPreset(
        "student", "sentence-transformers/all-MiniLM-L6-v2", 384),
}


@dataclass(frozen=True)
class ExportJob:
    corpus: str | Path
    preset: str
    out: str | Path
    batch_size: int = 32


@dataclass(frozen=True)
class ExportResult:
    n_docs: int
    dim: int
    out: Path
    sidecar: Path


def read_corpus_texts(path: str | Path) -> list[str]:
    """Raw text column of a corpus TSV, one entry per non-blank line.

    The text is taken verbatim (everything before the first tab): contextual
    encoders consume natural text, not tokenized or vocabulary-filtered
    forms, so no preprocessing happens here.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"corpus not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    texts = [line.split("\t", 1)[0] for line in lines if line.strip()]
    if not texts:
        raise DataError(f"{path}: corpus contains no documents")
    return texts


class SentenceTransformerEncoder:
    """Thin adapter around a sentence-transformers model."""

    def __init__(self, model, model_name: str):
        self._model = model
        self.model_name = model_name
        self.max_seq_length = int(getattr(model, "max_seq_length", 0)) or None

    def encode(self, texts: Sequence[str], batch_size: int) -> np.ndarray:
        try:
            out = self._model.encode(list(texts), batch_size=batch_size,
                                     convert_to_numpy=True,
                                     show_progress_bar=False)
        except Exception as exc:
            raise EncoderError(f"{self.model_name}: inference failed: {exc}") from exc
        return np.asarray(out, dtype=np.float32)


def load_encoder(preset: EncoderPreset) -> SentenceTransformerEncoder:
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise EncoderError(f"sentence-transformers is not installed: {exc}") from exc
    try:
        model = SentenceTransformer(preset.model_name)
    except Exception as exc:
        raise EncoderError(
            f"failed to load encoder {preset.model_name!r}: {exc}") from exc
    return SentenceTransformerEncoder(model, preset.model_name)


def _write_atomic(path: Path, payload: bytes) -> None:
    fd, tmp_name = tempfile.mkstemp(prefix=path.name + ".", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def write_embeddings(matrix: np.ndarray, path: str | Path) -> None:
    """Write an EMBv1 file atomically; rejects non-2-D or non-finite input."""
    arr = np.ascontiguousarray(np.asarray(matrix), dtype="<f4")
    if arr.ndim != 2:
        raise DataError(f"embedding matrix must be 2-D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DataError("embedding matrix contains non-finite values")
    path = Path(path)
    payload = MAGIC + struct.pack("<II", arr.shape[0], arr.shape[1]) + arr.tobytes()
    _write_atomic(path, payload)


def write_sidecar(out_path: str | Path, meta: dict) -> Path:
    side = Path(str(out_path) + SIDECAR_SUFFIX)
    text = "".join(f"{key} = {value}\n" for key, value in meta.items())
    _write_atomic(side, text.encode("utf-8"))
    return side


def export(job: ExportJob, encoder=None) -> ExportResult:
    """Encode a corpus TSV and write its EMBv1 file plus sidecar metadata.

    All validation (row count, dimension, finiteness) happens before any
    byte reaches the output path. An `encoder` instance may be supplied for
    testing; by default the job's preset is loaded.
    """
    if job.batch_size < 1:
        raise ConfigError(f"batch size must be >= 1, got {job.batch_size}")
    preset = PRESETS.get(job.preset)
    if preset is None:
        raise ConfigError(
            f"unknown preset {job.preset!r}; choose from {sorted(PRESETS)}")
    texts = read_corpus_texts(job.corpus)
    if encoder is None:
        encoder = load_encoder(preset)
    matrix = np.asarray(encoder.encode(texts, batch_size=job.batch_size))
    if matrix.ndim != 2 or matrix.shape[0] != len(texts):
        raise DataError(
            f"encoder returned shape {matrix.shape} for {len(texts)} "
            f"documents; aborting without writing")
    if matrix.shape[1] != preset.dim:
        raise DataError(
            f"encoder produced dimension {matrix.shape[1]}, but preset "
            f"{preset.key!r} requires {preset.dim}")
    out = Path(job.out)
    write_embeddings(matrix, out)
    max_len = encoder.max_seq_length
    sidecar = write_sidecar(out, {
        "preset": preset.key,
        "model": encoder.model_name,
        "dim": preset.dim,
        "n_docs": len(texts),
        "batch_size": job.batch_size,
        "max_seq_length": max_len if max_len is not None else "default",
        "corpus": Path(job.corpus).name,
    })
    return ExportResult(n_docs=len(texts), dim=preset.dim, out=out,
                        sidecar=sidecar)
