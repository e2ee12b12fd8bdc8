"""Command-line pipeline: prepare, train-teacher, distill, eval, compare, params.

Every experiment knob lives in a flat key=value config file and is
overridable by a CLI flag of the same name; flags win over the config,
which wins over defaults. Exit codes: 0 success, 2 usage/config error,
3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checkpoint, coherence, corpus, distill, embedstore, topicvae
from .errors import ConfigError, DataError, NumericError

# Optimal teacher depths per dataset and K (hidden layers of width 100)
DEPTH_PRESETS = {
    "20ng": {20: 1, 50: 1, 100: 5},
    "m10": {10: 4, 20: 5, 50: 2, 100: 3},
}

PARTITIONS = ("train", "validation", "test")


# -- config plumbing -------------------------------------------------------


def read_config_file(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    entries: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        entries[key.strip()] = value.strip()
    return entries


def _parse_bool(key: str, text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"config key {key!r}: expected a boolean, got {text!r}")


class Field:
    """One resolvable option: CLI flag > config file entry > default."""

    def __init__(self, flag: str, type_, default, help_: str, required: bool = False):
        self.flag = flag
        self.key = flag.lstrip("-")
        self.dest = self.key.replace("-", "_")
        self.type = type_
        self.default = default
        self.help = help_
        self.required = required

    def add_to(self, parser: argparse.ArgumentParser) -> None:
        if self.type is bool:
            parser.add_argument(self.flag, dest=self.dest, action="store_const",
                                const=True, default=None, help=self.help)
        else:
            parser.add_argument(self.flag, dest=self.dest, type=self.type,
                                default=None, help=self.help)

    def resolve(self, args: argparse.Namespace, cfg: dict[str, str]):
        value = getattr(args, self.dest)
        if value is None and self.key in cfg:
            raw = cfg[self.key]
            value = _parse_bool(self.key, raw) if self.type is bool else self.type(raw)
        if value is None:
            value = self.default
        if value is None and self.required:
            raise ConfigError(f"missing required option {self.flag}")
        return value


def resolve_fields(fields: list[Field], args: argparse.Namespace) -> argparse.Namespace:
    cfg = read_config_file(args.config) if args.config else {}
    known = {f.key for f in fields}
    unknown = sorted(set(cfg) - known)
    if unknown:
        raise ConfigError(f"unknown config keys for this command: {unknown}")
    out = argparse.Namespace()
    for field in fields:
        try:
            setattr(out, field.dest, field.resolve(args, cfg))
        except ValueError as exc:
            raise ConfigError(f"bad value for {field.flag}: {exc}") from exc
    return out


def n_threads() -> int:
    raw = os.environ.get("WKD_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ConfigError(f"WKD_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ConfigError(f"WKD_THREADS must be >= 1, got {value}")
    return value


def pick_depth(dataset_name: str, k: int, hidden_depth: int) -> int:
    """Explicit depth wins; otherwise the bundled per-dataset optimum; else 1."""
    if hidden_depth > 0:
        return hidden_depth
    if dataset_name:
        presets = DEPTH_PRESETS.get(dataset_name.lower())
        if presets is None:
            raise ConfigError(
                f"unknown dataset name {dataset_name!r}; known: {sorted(DEPTH_PRESETS)}")
        if k not in presets:
            raise ConfigError(
                f"no bundled depth for {dataset_name} K={k}; known K: {sorted(presets)}")
        return presets[k]
    return 1


# -- shared artifact loading -----------------------------------------------


def _require_path(path: str | Path, kind: str) -> Path:
    """User-supplied paths that do not exist are usage errors, not data errors."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{kind} not found: {path}")
    return path


def _load_prepared(prepared: str | Path):
    prepared = Path(prepared)
    vocab_path = prepared / "vocab.txt"
    if not vocab_path.is_file():
        raise DataError(f"{prepared}: no vocab.txt; run `wkd prepare` first")
    vocab = corpus.Vocabulary.load(vocab_path)
    bows = {}
    for part in PARTITIONS:
        path = prepared / f"bow_{part}.npy"
        if not path.is_file():
            raise DataError(f"{prepared}: missing {path.name}")
        bows[part] = np.load(path)
    return vocab, bows


def _load_embeddings_for(part_rows: int, path: str | Path) -> np.ndarray:
    emb = embedstore.read_embeddings(path)
    if emb.n_docs != part_rows:
        raise DataError(
            f"{path}: {emb.n_docs} embedding rows but the partition has {part_rows} documents")
    return emb.data.astype(np.float64)


def _train_corpus(dataset: str | Path) -> corpus.Corpus:
    full = corpus.load_tsv(dataset)
    train = full.partition("train")
    if not train.documents:
        raise DataError(f"{dataset}: no train documents")
    return train


# -- subcommands -----------------------------------------------------------


def cmd_prepare(ns) -> int:
    _require_path(ns.dataset, "dataset")
    full = corpus.load_tsv(ns.dataset)
    vocab = corpus.build_vocab(full, ns.vocab_size)
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    vocab.save(out / "vocab.txt")
    meta = [f"dataset {ns.dataset}", f"vocab_size {len(vocab.words)}"]
    for part in PARTITIONS:
        part_corpus = full.partition(part)
        np.save(out / f"bow_{part}.npy", corpus.bow_matrix(part_corpus, vocab))
        meta.append(f"n_{part} {len(part_corpus)}")
    dims = [int(d) for d in str(ns.synth_dims).split(",") if d] if ns.synth_dims else []
    for dim in dims:
        if dim < 1:
            raise ConfigError(f"synth embedding dim must be >= 1, got {dim}")
        for part in PARTITIONS:
            mat = embedstore.synth_embeddings(full.partition(part), dim, ns.seed)
            embedstore.write_embeddings(mat, out / f"synth{dim}_{part}.emb")
    if dims:
        meta.append(f"synth_dims {','.join(map(str, dims))}")
    meta.append(f"vocab_hash {checkpoint.vocab_hash(vocab)}")
    (out / "meta.txt").write_text("\n".join(meta) + "\n", encoding="utf-8")
    print(f"prepared {ns.out}: vocab {len(vocab.words)}, "
          + ", ".join(f"{p}={len(full.partition(p).documents)}" for p in PARTITIONS))
    return 0


def cmd_train_teacher(ns) -> int:
    _require_path(ns.prepared, "prepared directory")
    _require_path(ns.teacher_embeddings, "teacher embeddings")
    vocab, bows = _load_prepared(ns.prepared)
    bow = bows["train"]
    ctx = _load_embeddings_for(bow.shape[0], ns.teacher_embeddings)
    depth = pick_depth(ns.dataset_name, ns.k, ns.hidden_depth)
    config = topicvae.ModelConfig(
        architecture="combined",
        n_topics=ns.k,
        vocab_size=len(vocab.words),
        ctx_dim=ctx.shape[1],
        hidden_sizes=(ns.hidden_width,) * depth,
    )
    model = topicvae.TopicModel(config, seed=ns.seed)
    history = distill.train_vae(model, bow, ctx, epochs=ns.epochs,
                                batch_size=ns.batch_size, seed=ns.seed, lr=ns.lr)
    out = Path(ns.out)
    checkpoint.save_model(out, model, seed=ns.seed, vocab=vocab)
    distill.write_history(out / "history.csv", history)
    counts = topicvae.count_parameters(model)
    print(f"teacher K={ns.k} H={depth} params={counts.trainable} "
          f"buffers={counts.buffers} final_loss={history[-1].total:.4f}")
    return 0


def _score_run(model, vocab, train_corpus, tag, seed, top_n, npmi_window, cv_window):
    topics = coherence.extract_topics(model, vocab, top_n=top_n)
    words = sorted({w for topic in topics.topics for w in topic})
    counts_npmi = coherence.count_cooccurrence(train_corpus, vocab, npmi_window, words=words)
    counts_cv = coherence.count_cooccurrence(train_corpus, vocab, cv_window, words=words)
    return coherence.score_topics(tag, seed, topics, counts_npmi, counts_cv)


def _distill_one_run(payload: dict):
    """One student training run; importable at module top level so the
    distill command can fan runs out across processes."""
    run = payload["run"]
    seed = payload["seed_base"] + run
    teacher_model, _ = checkpoint.load_model(payload["teacher_ckpt"])
    teacher = distill.FrozenTeacher(teacher_model)
    vocab, bows = _load_prepared(payload["prepared"])
    bow = bows["train"]
    teacher_ctx = _load_embeddings_for(bow.shape[0], payload["teacher_embeddings"])
    student_ctx = _load_embeddings_for(bow.shape[0], payload["student_embeddings"])
    config = topicvae.ModelConfig(
        architecture="zeroshot",
        n_topics=teacher_model.config.n_topics,
        vocab_size=teacher_model.config.vocab_size,
        ctx_dim=student_ctx.shape[1],
        hidden_sizes=(payload["hidden_width"],),
    )
    student = topicvae.TopicModel(config, seed=seed)
    cfg = distill.KdConfig(
        alpha=payload["alpha"], temperature=payload["temperature"],
        epochs=payload["epochs"], batch_size=payload["batch_size"], seed=seed,
        lr=payload["lr"], use_2w=payload["use_2w"], use_ce=payload["use_ce"],
        shared_theta=payload["shared_theta"], teacher_ref=str(payload["teacher_ckpt"]),
    )
    history = distill.train_student_with_kd(
        teacher, student, bow, teacher_ctx, student_ctx, cfg)
    run_dir = Path(payload["out"]) / f"run{run}"
    checkpoint.save_model(run_dir, student, seed=seed, vocab=vocab)
    distill.write_history(run_dir / "history.csv", history)
    train_corpus = _train_corpus(payload["dataset"])
    report = _score_run(student, vocab, train_corpus, payload["tag"], seed,
                        payload["top_n"], payload["npmi_window"], payload["cv_window"])
    return run, report


def cmd_distill(ns) -> int:
    _require_path(ns.prepared, "prepared directory")
    _require_path(ns.dataset, "dataset")
    _require_path(ns.teacher_ckpt, "teacher checkpoint")
    _require_path(ns.teacher_embeddings, "teacher embeddings")
    _require_path(ns.student_embeddings, "student embeddings")
    teacher_model, teacher_man = checkpoint.load_model(ns.teacher_ckpt)
    vocab, bows = _load_prepared(ns.prepared)
    if teacher_man["vocab_hash"] != checkpoint.vocab_hash(vocab):
        raise DataError("teacher checkpoint was trained on a different vocabulary")
    if teacher_model.config.vocab_size != len(vocab.words):
        raise ConfigError(
            f"teacher V={teacher_model.config.vocab_size} != vocab {len(vocab.words)}")
    use_2w = not ns.no_2w
    use_ce = not ns.no_ce
    tag = ns.tag or ("S" if ns.alpha == 0.0 else "SKD")
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    payload = {
        "prepared": str(ns.prepared), "dataset": str(ns.dataset),
        "teacher_ckpt": str(ns.teacher_ckpt),
        "teacher_embeddings": str(ns.teacher_embeddings),
        "student_embeddings": str(ns.student_embeddings),
        "alpha": ns.alpha, "temperature": ns.temperature, "epochs": ns.epochs,
        "batch_size": ns.batch_size, "seed_base": ns.seed, "lr": ns.lr,
        "use_2w": use_2w, "use_ce": use_ce, "shared_theta": ns.shared_theta,
        "hidden_width": ns.hidden_width, "out": str(out), "tag": tag,
        "top_n": ns.top_n, "npmi_window": ns.npmi_window, "cv_window": ns.cv_window,
    }
    jobs = [dict(payload, run=i) for i in range(ns.runs)]
    threads = n_threads()
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = sorted(pool.map(_distill_one_run, jobs))
    else:
        results = [_distill_one_run(job) for job in jobs]
    reports = [report for _, report in results]
    coherence.write_report_csv(out / "report.csv", reports)
    npmi_median = float(np.median([r.npmi_mean for r in reports]))
    cv_median = float(np.median([r.cv_mean for r in reports]))
    with open(out / "summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["model", "K", "runs", "npmi_median", "cv_median"])
        writer.writerow([tag, teacher_model.config.n_topics, ns.runs,
                         repr(npmi_median), repr(cv_median)])
    student_model, _ = checkpoint.load_model(out / "run0")
    t_counts = topicvae.count_parameters(teacher_model)
    s_counts = topicvae.count_parameters(student_model)
    reduction = topicvae.compression_ratio(t_counts, s_counts)
    meta = [
        f"model {tag}",
        f"alpha {ns.alpha}", f"temperature {ns.temperature}",
        f"epochs {ns.epochs}", f"batch_size {ns.batch_size}",
        f"runs {ns.runs}", f"seed_base {ns.seed}", f"lr {ns.lr}",
        f"use_2w {use_2w}", f"use_ce {use_ce}", f"shared_theta {ns.shared_theta}",
        f"teacher_ckpt {ns.teacher_ckpt}",
        f"teacher_params {t_counts.trainable}", f"teacher_buffers {t_counts.buffers}",
        f"teacher_bytes {t_counts.bytes}",
        f"student_params {s_counts.trainable}", f"student_buffers {s_counts.buffers}",
        f"student_bytes {s_counts.bytes}",
        f"compression_percent {100.0 * reduction:.1f}",
    ]
    (out / "meta.txt").write_text("\n".join(meta) + "\n", encoding="utf-8")
    print(f"{tag} runs={ns.runs} npmi_median={npmi_median:.4f} "
          f"cv_median={cv_median:.4f} compression={100.0 * reduction:.1f}%")
    return 0


def cmd_eval(ns) -> int:
    _require_path(ns.ckpt, "checkpoint")
    _require_path(ns.dataset, "dataset")
    _require_path(ns.prepared, "prepared directory")
    model, man = checkpoint.load_model(ns.ckpt)
    vocab, _ = _load_prepared(ns.prepared)
    if man["vocab_hash"] != checkpoint.vocab_hash(vocab):
        raise DataError("checkpoint vocabulary does not match the prepared dataset")
    train_corpus = _train_corpus(ns.dataset)
    tag = ns.tag or model.config.architecture
    report = _score_run(model, vocab, train_corpus, tag, ns.seed,
                        ns.top_n, ns.npmi_window, ns.cv_window)
    if ns.out:
        coherence.write_report_csv(ns.out, [report])
    print(f"{tag} K={report.k} npmi={report.npmi_mean:.4f} cv={report.cv_mean:.4f}")
    return 0


def _read_aggregates(path: str | Path):
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or set(coherence.REPORT_COLUMNS) - set(reader.fieldnames):
                raise DataError(f"{path}: not a coherence report CSV")
            for row in reader:
                if row["topic_id"] == "aggregate":
                    rows.append((row["model"], int(row["K"]), int(row["seed"]),
                                 float(row["npmi"]), float(row["cv"])))
    except OSError as exc:
        raise DataError(f"cannot read report {path}: {exc}") from exc
    if not rows:
        raise DataError(f"{path}: no aggregate rows")
    return rows


def cmd_compare(ns) -> int:
    if len(ns.reports) < 2:
        raise ConfigError("need >= 2 reports to compare")
    for path in ns.reports:
        _require_path(path, "report")
    groups: dict[tuple[str, int], list[tuple[float, float]]] = {}
    order: list[str] = []
    for path in ns.reports:
        for model, k, _seed, npmi, cv in _read_aggregates(path):
            groups.setdefault((model, k), []).append((npmi, cv))
            if model not in order:
                order.append(model)
    ks = sorted({k for _, k in groups})
    base = order[0]
    lines = [["model", "K", "npmi_median", "cv_median", "npmi_delta", "cv_delta"]]
    for k in ks:
        base_vals = groups.get((base, k))
        base_npmi = float(np.median([v[0] for v in base_vals])) if base_vals else None
        base_cv = float(np.median([v[1] for v in base_vals])) if base_vals else None
        for model in order:
            vals = groups.get((model, k))
            if vals is None:
                print(f"warning: no rows for model {model} at K={k}", file=sys.stderr)
                continue
            npmi = float(np.median([v[0] for v in vals]))
            cv = float(np.median([v[1] for v in vals]))
            d_npmi = "" if base_npmi is None else repr(npmi - base_npmi)
            d_cv = "" if base_cv is None else repr(cv - base_cv)
            lines.append([model, str(k), repr(npmi), repr(cv), d_npmi, d_cv])
    for line in lines:
        print("\t".join(str(c) for c in line))
    if ns.teacher_ckpt and ns.student_ckpt:
        t_model, _ = checkpoint.load_model(ns.teacher_ckpt)
        s_model, _ = checkpoint.load_model(ns.student_ckpt)
        t_counts = topicvae.count_parameters(t_model)
        s_counts = topicvae.count_parameters(s_model)
        reduction = topicvae.compression_ratio(t_counts, s_counts)
        print(f"compression\tteacher_bytes={t_counts.bytes}\t"
              f"student_bytes={s_counts.bytes}\tpercent={100.0 * reduction:.1f}")
    if ns.out:
        with open(ns.out, "w", newline="", encoding="utf-8") as fh:
            csv.writer(fh).writerows(lines)
    return 0


def cmd_params(ns) -> int:
    depth = pick_depth(ns.dataset_name, ns.k, ns.hidden_depth)
    teacher = topicvae.TopicModel(topicvae.ModelConfig(
        "combined", ns.k, ns.vocab_size, ns.teacher_ctx_dim,
        (ns.hidden_width,) * depth))
    student = topicvae.TopicModel(topicvae.ModelConfig(
        "zeroshot", ns.k, ns.vocab_size, ns.student_ctx_dim, (ns.hidden_width,)))
    t_counts = topicvae.count_parameters(teacher)
    s_counts = topicvae.count_parameters(student)
    reduction = topicvae.compression_ratio(t_counts, s_counts)
    print(f"teacher_depth {depth}")
    print(f"teacher_params {t_counts.trainable}")
    print(f"teacher_buffers {t_counts.buffers}")
    print(f"teacher_bytes {t_counts.bytes}")
    print(f"student_params {s_counts.trainable}")
    print(f"student_buffers {s_counts.buffers}")
    print(f"student_bytes {s_counts.bytes}")
    print(f"compression_percent {100.0 * reduction:.1f}")
    return 0


# -- argument wiring -------------------------------------------------------


FIELDS = {
    "prepare": [
        Field("--dataset", str, None, "input TSV (text<TAB>partition[<TAB>label])", required=True),
        Field("--vocab-size", int, 2000, "vocabulary size cap"),
        Field("--out", str, None, "output directory", required=True),
        Field("--synth-dims", str, "", "comma-separated synthetic embedding dims"),
        Field("--seed", int, 0, "seed for synthetic embeddings"),
    ],
    "train-teacher": [
        Field("--prepared", str, None, "directory from `wkd prepare`", required=True),
        Field("--teacher-embeddings", str, None, "EMBv1 train embeddings", required=True),
        Field("--k", int, 20, "number of topics"),
        Field("--dataset-name", str, "", "preset name for hidden depth (20ng, m10)"),
        Field("--hidden-depth", int, 0, "teacher hidden layers (0 = preset/default)"),
        Field("--hidden-width", int, 100, "hidden layer width"),
        Field("--epochs", int, 100, "training epochs"),
        Field("--batch-size", int, 64, "batch size"),
        Field("--seed", int, 0, "training seed"),
        Field("--lr", float, 2e-3, "Adam learning rate"),
        Field("--out", str, None, "checkpoint directory", required=True),
    ],
    "distill": [
        Field("--prepared", str, None, "directory from `wkd prepare`", required=True),
        Field("--dataset", str, None, "input TSV (coherence reference)", required=True),
        Field("--teacher-ckpt", str, None, "teacher checkpoint directory", required=True),
        Field("--teacher-embeddings", str, None, "EMBv1 train embeddings (teacher)", required=True),
        Field("--student-embeddings", str, None, "EMBv1 train embeddings (student)", required=True),
        Field("--alpha", float, 0.5, "KD interpolation weight in [0,1]"),
        Field("--temperature", float, 2.0, "soft-label temperature"),
        Field("--runs", int, 5, "independent student runs"),
        Field("--epochs", int, 100, "training epochs"),
        Field("--batch-size", int, 64, "batch size"),
        Field("--seed", int, 0, "seed base; run i uses seed+i"),
        Field("--lr", float, 2e-3, "Adam learning rate"),
        Field("--no-2w", bool, False, "drop the Wasserstein term"),
        Field("--no-ce", bool, False, "drop the soft cross-entropy term"),
        Field("--shared-theta", bool, False, "teacher logits from the student's theta"),
        Field("--hidden-width", int, 100, "student hidden width"),
        Field("--tag", str, "", "model tag for reports (default SKD, or S at alpha=0)"),
        Field("--top-n", int, 10, "words per topic"),
        Field("--npmi-window", int, 10, "NPMI window size"),
        Field("--cv-window", int, 110, "CV window size"),
        Field("--out", str, None, "output directory", required=True),
    ],
    "eval": [
        Field("--ckpt", str, None, "checkpoint directory", required=True),
        Field("--dataset", str, None, "input TSV (coherence reference)", required=True),
        Field("--prepared", str, None, "directory from `wkd prepare`", required=True),
        Field("--tag", str, "", "model tag for the report"),
        Field("--seed", int, 0, "seed recorded in report metadata"),
        Field("--top-n", int, 10, "words per topic"),
        Field("--npmi-window", int, 10, "NPMI window size"),
        Field("--cv-window", int, 110, "CV window size"),
        Field("--out", str, "", "report CSV path (optional)"),
    ],
    "params": [
        Field("--k", int, None, "number of topics", required=True),
        Field("--vocab-size", int, 2000, "vocabulary size"),
        Field("--teacher-ctx-dim", int, 768, "teacher embedding dim"),
        Field("--student-ctx-dim", int, 384, "student embedding dim"),
        Field("--dataset-name", str, "", "preset name for hidden depth"),
        Field("--hidden-depth", int, 0, "teacher hidden layers (0 = preset/default)"),
        Field("--hidden-width", int, 100, "hidden layer width"),
    ],
}

COMMANDS = {
    "prepare": cmd_prepare,
    "train-teacher": cmd_train_teacher,
    "distill": cmd_distill,
    "eval": cmd_eval,
    "compare": cmd_compare,
    "params": cmd_params,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wkd",
        description="Wasserstein knowledge distillation for neural topic models")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fields in FIELDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="flat key=value config file; flags override it")
        for field in fields:
            field.add_to(p)
    p = sub.add_parser("compare")
    p.add_argument("--config", type=str, default=None, help=argparse.SUPPRESS)
    p.add_argument("--reports", nargs="+", required=True,
                   help="coherence report CSVs (>= 2)")
    p.add_argument("--teacher-ckpt", type=str, default="",
                   help="teacher checkpoint for the compression summary")
    p.add_argument("--student-ckpt", type=str, default="",
                   help="student checkpoint for the compression summary")
    p.add_argument("--out", type=str, default="", help="write the table as CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "compare":
            return cmd_compare(args)
        fields = FIELDS[args.command]
        ns = resolve_fields(fields, args)
        return COMMANDS[args.command](ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
