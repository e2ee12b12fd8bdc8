"""CLI tests for embed-export, driving main() with an injected encoder."""

import subprocess
import sys

import pytest

import embed_export
from embed_export import EncoderError
from embed_export.cli import main

from _fake_encoder import FakeEncoder, WrongRowsEncoder


@pytest.fixture
def corpus_tsv(tmp_path):
    path = tmp_path / "corpus.tsv"
    path.write_text("alpha doc\ttrain\nbeta doc\ttest\ngamma doc\n",
                    encoding="utf-8")
    return path


def patch_encoder(monkeypatch, factory):
    encoders = []

    def fake_load(preset):
        enc = factory(preset.dim)
        encoders.append(enc)
        return enc

    monkeypatch.setattr(embed_export, "load_encoder", fake_load)
    return encoders


def test_export_success(corpus_tsv, tmp_path, monkeypatch, capsys):
    patch_encoder(monkeypatch, FakeEncoder)
    out = tmp_path / "student.emb"
    code = main(["export", "--corpus", str(corpus_tsv),
                 "--preset", "student", "--out", str(out)])
    assert code == 0
    assert out.exists()
    assert (tmp_path / "student.emb.meta").exists()
    assert capsys.readouterr().out.strip() == \
        f"wrote 3 x 384 embeddings to {out}"


def test_batch_size_flag_reaches_encoder(corpus_tsv, tmp_path, monkeypatch):
    encoders = patch_encoder(monkeypatch, FakeEncoder)
    code = main(["export", "--corpus", str(corpus_tsv), "--preset", "teacher",
                 "--out", str(tmp_path / "t.emb"), "--batch-size", "7"])
    assert code == 0
    (enc,) = encoders
    (texts, batch_size), = enc.calls
    assert len(texts) == 3
    assert batch_size == 7


def test_missing_corpus_exits_2(tmp_path, capsys):
    # Corpus validation happens before the encoder is loaded, so no patching
    # is needed and no model download is attempted.
    code = main(["export", "--corpus", str(tmp_path / "absent.tsv"),
                 "--preset", "student", "--out", str(tmp_path / "o.emb")])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_unknown_preset_exits_2(corpus_tsv, tmp_path, capsys):
    code = main(["export", "--corpus", str(corpus_tsv), "--preset", "huge",
                 "--out", str(tmp_path / "o.emb")])
    assert code == 2


def test_missing_required_flag_exits_2(capsys):
    assert main(["export", "--preset", "student", "--out", "x.emb"]) == 2


def test_encoder_failure_exits_4(corpus_tsv, tmp_path, monkeypatch, capsys):
    def boom(preset):
        raise EncoderError("model unavailable")

    monkeypatch.setattr(embed_export, "load_encoder", boom)
    code = main(["export", "--corpus", str(corpus_tsv), "--preset", "student",
                 "--out", str(tmp_path / "o.emb")])
    assert code == 4
    assert "model unavailable" in capsys.readouterr().err


def test_data_error_exits_3_without_file(corpus_tsv, tmp_path, monkeypatch,
                                         capsys):
    patch_encoder(monkeypatch, WrongRowsEncoder)
    out = tmp_path / "o.emb"
    code = main(["export", "--corpus", str(corpus_tsv), "--preset", "student",
                 "--out", str(out)])
    assert code == 3
    assert not out.exists()
    assert "error:" in capsys.readouterr().err


def test_module_invocation_exit_code(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "embed_export.cli", "export",
         "--corpus", str(tmp_path / "missing.tsv"),
         "--preset", "student", "--out", str(tmp_path / "o.emb")],
        capture_output=True, text=True)
    assert proc.returncode == 2
    assert "error:" in proc.stderr
