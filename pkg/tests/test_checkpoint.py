"""Unit tests for TNSv1 tensor blobs and model checkpoint directories."""

import struct

import numpy as np
import pytest

from wkd.checkpoint import (
    MAGIC,
    MANIFEST_NAME,
    config_hash,
    load_model,
    model_checksum,
    read_manifest,
    read_tensor,
    save_model,
    vocab_hash,
    write_tensor,
)
from wkd.corpus import Vocabulary
from wkd.errors import FormatError
from wkd.topicvae import ModelConfig, TopicModel, count_parameters


def make_model(arch="combined", seed=3):
    cfg = ModelConfig(architecture=arch, n_topics=3, vocab_size=5, ctx_dim=4,
                      hidden_sizes=(6,), dropout=0.2)
    return TopicModel(cfg, seed=seed)


VOCAB = Vocabulary.from_words(["alpha", "beta", "gamma", "delta", "eps"])


# -- tensor blobs -----------------------------------------------------------


def test_tensor_roundtrip_values(tmp_path):
    arr = np.random.default_rng(0).normal(size=(3, 4)).astype(np.float32)
    path = tmp_path / "t.tns"
    write_tensor(path, arr)
    back = read_tensor(path)
    assert back.shape == (3, 4)
    assert back.dtype == np.float64
    assert np.array_equal(back.astype(np.float32), arr)


def test_tensor_blob_layout(tmp_path):
    path = tmp_path / "t.tns"
    write_tensor(path, np.array([1.0, 2.0], np.float32))
    blob = path.read_bytes()
    assert blob[:5] == MAGIC
    rank, = struct.unpack_from("<I", blob, 5)
    assert rank == 1
    dim0, = struct.unpack_from("<I", blob, 9)
    assert dim0 == 2
    assert len(blob) == 5 + 4 + 4 + 8


def test_tensor_rank0_roundtrip(tmp_path):
    path = tmp_path / "s.tns"
    write_tensor(path, np.array(7.5, np.float32))
    back = read_tensor(path)
    assert back.shape == () and back == 7.5


def test_tensor_bad_magic(tmp_path):
    path = tmp_path / "bad.tns"
    path.write_bytes(b"XXXXX" + struct.pack("<II", 1, 1) + b"\x00" * 4)
    with pytest.raises(FormatError):
        read_tensor(path)


def test_tensor_truncated(tmp_path):
    path = tmp_path / "t.tns"
    write_tensor(path, np.zeros((2, 2), np.float32))
    blob = path.read_bytes()
    path.write_bytes(blob[:-3])
    with pytest.raises(FormatError):
        read_tensor(path)


# -- hashes and checksums ---------------------------------------------------


def test_config_hash_sensitivity():
    base = ModelConfig("combined", 3, 5, 4, hidden_sizes=(6,))
    same = ModelConfig("combined", 3, 5, 4, hidden_sizes=(6,))
    other = ModelConfig("combined", 4, 5, 4, hidden_sizes=(6,))
    assert config_hash(base) == config_hash(same)
    assert config_hash(base) != config_hash(other)
    assert config_hash(base) != config_hash(
        ModelConfig("zeroshot", 3, 5, 4, hidden_sizes=(6,)))


def test_vocab_hash_sensitivity():
    a = Vocabulary.from_words(["x", "y"])
    b = Vocabulary.from_words(["y", "x"])
    assert vocab_hash(a) == vocab_hash(Vocabulary.from_words(["x", "y"]))
    assert vocab_hash(a) != vocab_hash(b)


def test_model_checksum_tracks_parameters():
    model = make_model()
    before = model_checksum(model)
    assert before == model_checksum(model)
    model.beta.data[0, 0] += 1.0
    assert model_checksum(model) != before


def test_model_checksum_tracks_buffers():
    model = make_model()
    before = model_checksum(model)
    model.decoder_norm.running_mean[0] += 1.0
    assert model_checksum(model) != before


# -- checkpoint directories -------------------------------------------------


def test_save_load_roundtrip_bit_identical(tmp_path):
    model = make_model(seed=7)
    # make running stats nontrivial so buffers are exercised
    model.decoder_norm.running_mean[...] = np.arange(5, dtype=float) / 7
    model.decoder_norm.running_var[...] = 1.0 + np.arange(5, dtype=float) / 3
    save_model(tmp_path / "ck", model, seed=7, vocab=VOCAB)
    loaded, manifest = load_model(tmp_path / "ck")
    assert loaded.config == model.config
    assert manifest["seed"] == "7"
    # checkpoint stores f32, so compare after one f32 round trip
    f32 = lambda a: a.astype(np.float32).astype(np.float64)
    for (name, p), (_, q) in zip(model.named_parameters(), loaded.named_parameters()):
        assert np.array_equal(f32(p.data), q.data), name
    for (name, b), (_, c) in zip(model.named_buffers(), loaded.named_buffers()):
        assert np.array_equal(f32(b), c), name


def test_checksum_stable_across_roundtrip(tmp_path):
    model = make_model(seed=9)
    save_model(tmp_path / "ck", model, seed=9, vocab=VOCAB)
    first, _ = load_model(tmp_path / "ck")
    save_model(tmp_path / "ck2", first, seed=9, vocab=VOCAB)
    second, _ = load_model(tmp_path / "ck2")
    assert model_checksum(first) == model_checksum(second)


def test_manifest_contents(tmp_path):
    model = make_model()
    save_model(tmp_path / "ck", model, seed=11, vocab=VOCAB)
    manifest = read_manifest(tmp_path / "ck")
    for key in ("architecture", "n_topics", "vocab_size", "ctx_dim",
                "hidden_sizes", "seed", "config_hash", "vocab_hash"):
        assert key in manifest, key
    assert manifest["architecture"] == "combined"
    assert manifest["n_topics"] == "3"
    assert manifest["config_hash"] == config_hash(model.config)
    assert manifest["vocab_hash"] == vocab_hash(VOCAB)


def test_load_missing_manifest(tmp_path):
    (tmp_path / "ck").mkdir()
    with pytest.raises(FormatError):
        load_model(tmp_path / "ck")


def test_load_missing_blob(tmp_path):
    model = make_model()
    save_model(tmp_path / "ck", model, seed=0, vocab=VOCAB)
    (tmp_path / "ck" / "beta.tns").unlink()
    with pytest.raises(FormatError):
        load_model(tmp_path / "ck")


def test_load_extra_blob(tmp_path):
    model = make_model()
    save_model(tmp_path / "ck", model, seed=0, vocab=VOCAB)
    write_tensor(tmp_path / "ck" / "stray.tns", np.zeros(2, np.float32))
    with pytest.raises(FormatError):
        load_model(tmp_path / "ck")


def test_load_wrong_shape_blob(tmp_path):
    model = make_model()
    save_model(tmp_path / "ck", model, seed=0, vocab=VOCAB)
    write_tensor(tmp_path / "ck" / "beta.tns", np.zeros((2, 2), np.float32))
    with pytest.raises(FormatError):
        load_model(tmp_path / "ck")


def test_load_manifest_hash_mismatch(tmp_path):
    model = make_model()
    save_model(tmp_path / "ck", model, seed=0, vocab=VOCAB)
    mpath = tmp_path / "ck" / MANIFEST_NAME
    text = mpath.read_text()
    mpath.write_text(text.replace(config_hash(model.config), "0" * 16))
    with pytest.raises(FormatError):
        load_model(tmp_path / "ck")


def test_zeroshot_roundtrip_param_counts(tmp_path):
    model = make_model("zeroshot")
    save_model(tmp_path / "ck", model, seed=0, vocab=VOCAB)
    loaded, _ = load_model(tmp_path / "ck")
    assert count_parameters(loaded) == count_parameters(model)
