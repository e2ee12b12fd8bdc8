"""Model checkpoints: a text manifest plus one TNSv1 tensor blob per array.

A checkpoint is a directory. Each named parameter and buffer is stored as
``<name>.tns`` (magic ``TNSv1``, rank and dims as u32 LE, then f32 LE data,
row-major). The manifest is written last so its presence marks a complete
checkpoint.
"""

from __future__ import annotations

import hashlib
import struct
from pathlib import Path

import numpy as np

from .corpus import Vocabulary
from .errors import ConfigError, DataError, FormatError
from .topicvae import ModelConfig, TopicModel

MAGIC = b"TNSv1"
MANIFEST_NAME = "manifest.txt"


def write_tensor(path: str | Path, arr: np.ndarray) -> None:
    arr = np.asarray(arr, dtype=np.float32)
    header = MAGIC + struct.pack("<I", arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(arr.tobytes(order="C"))
    except OSError as exc:
        raise DataError(f"cannot write tensor {path}: {exc}") from exc


def read_tensor(path: str | Path) -> np.ndarray:
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise DataError(f"cannot read tensor {path}: {exc}") from exc
    if blob[: len(MAGIC)] != MAGIC:
        raise FormatError(f"{path}: bad magic, not a TNSv1 tensor")
    off = len(MAGIC)
    if len(blob) < off + 4:
        raise FormatError(f"{path}: truncated header")
    (rank,) = struct.unpack_from("<I", blob, off)
    off += 4
    if len(blob) < off + 4 * rank:
        raise FormatError(f"{path}: truncated dims")
    dims = struct.unpack_from(f"<{rank}I", blob, off)
    off += 4 * rank
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    expected = off + 4 * count
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", count=count, offset=off)
    return data.reshape(dims).astype(np.float64)


def config_hash(config: ModelConfig) -> str:
    text = "|".join(
        str(x)
        for x in (
            config.architecture,
            config.n_topics,
            config.vocab_size,
            config.ctx_dim,
            ",".join(map(str, config.hidden_sizes)),
            config.dropout,
        )
    )
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def vocab_hash(vocab: Vocabulary) -> str:
    return hashlib.sha256("\n".join(vocab.words).encode("utf-8")).hexdigest()[:16]


def model_checksum(model: TopicModel) -> str:
    """SHA-256 over all parameter and buffer bytes, in name order."""
    h = hashlib.sha256()
    for name, p in model.named_parameters():
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(p.data).tobytes())
    for name, b in model.named_buffers():
        h.update(name.encode("utf-8"))
        h.update(np.ascontiguousarray(b).tobytes())
    return h.hexdigest()


def _model_arrays(model: TopicModel) -> list[tuple[str, np.ndarray]]:
    out = [(name, p.data) for name, p in model.named_parameters()]
    out += [(name, b) for name, b in model.named_buffers()]
    return out


def save_model(dirpath: str | Path, model: TopicModel, seed: int, vocab: Vocabulary) -> None:
    """Write a complete checkpoint directory (manifest last)."""
    dirpath = Path(dirpath)
    dirpath.mkdir(parents=True, exist_ok=True)
    for name, arr in _model_arrays(model):
        write_tensor(dirpath / f"{name}.tns", arr)
    cfg = model.config
    lines = [
        f"architecture {cfg.architecture}",
        f"n_topics {cfg.n_topics}",
        f"vocab_size {cfg.vocab_size}",
        f"ctx_dim {cfg.ctx_dim}",
        f"hidden_sizes {','.join(map(str, cfg.hidden_sizes))}",
        f"dropout {cfg.dropout}",
        f"seed {seed}",
        f"config_hash {config_hash(cfg)}",
        f"vocab_hash {vocab_hash(vocab)}",
    ]
    try:
        (dirpath / MANIFEST_NAME).write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write manifest in {dirpath}: {exc}") from exc


def read_manifest(dirpath: str | Path) -> dict[str, str]:
    path = Path(dirpath) / MANIFEST_NAME
    if not path.is_file():
        raise FormatError(f"{dirpath}: no {MANIFEST_NAME}; not a checkpoint directory")
    entries: dict[str, str] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split(None, 1)
        if len(parts) != 2:
            raise FormatError(f"{path}:{lineno}: malformed manifest line {line!r}")
        entries[parts[0]] = parts[1]
    required = ("architecture", "n_topics", "vocab_size", "ctx_dim",
                "hidden_sizes", "seed", "config_hash", "vocab_hash")
    missing = [k for k in required if k not in entries]
    if missing:
        raise FormatError(f"{path}: manifest missing keys {missing}")
    return entries


def load_model(dirpath: str | Path) -> tuple[TopicModel, dict[str, str]]:
    """Rebuild a model from a checkpoint directory; verifies hash and shapes."""
    dirpath = Path(dirpath)
    man = read_manifest(dirpath)
    try:
        config = ModelConfig(
            architecture=man["architecture"],
            n_topics=int(man["n_topics"]),
            vocab_size=int(man["vocab_size"]),
            ctx_dim=int(man["ctx_dim"]),
            hidden_sizes=tuple(int(s) for s in man["hidden_sizes"].split(",")),
            dropout=float(man.get("dropout", 0.2)),
        )
        seed = int(man["seed"])
    except (ValueError, ConfigError) as exc:
        raise FormatError(f"{dirpath}: bad manifest: {exc}") from exc
    if config_hash(config) != man["config_hash"]:
        raise FormatError(f"{dirpath}: config hash mismatch; manifest is inconsistent")

    model = TopicModel(config, seed=seed)
    expected = dict(_model_arrays(model))
    for name, target in expected.items():
        path = dirpath / f"{name}.tns"
        if not path.is_file():
            raise FormatError(f"{dirpath}: missing tensor blob {name}.tns")
        arr = read_tensor(path)
        if arr.shape != target.shape:
            raise FormatError(
                f"{dirpath}: tensor {name} has shape {arr.shape}, expected {target.shape}"
            )
        target[...] = arr
    extra = sorted(
        p.name for p in dirpath.glob("*.tns") if p.name[: -len(".tns")] not in expected
    )
    if extra:
        raise FormatError(f"{dirpath}: unexpected tensor blobs {extra}")
    return model, man
