"""Topic-quality metrics: NPMI and CV over boolean sliding windows.

Windows of a fixed token width slide with stride 1 over each document;
documents shorter than the window contribute a single window. A word
"occurs" in a window if any of the window's in-vocabulary tokens equals it
(boolean presence, multiplicity ignored). NPMI scores word pairs from these
window statistics; CV is the one-set-segmentation indirect cosine measure
built on NPMI vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log
from typing import Sequence

import numpy as np

from .corpus import Corpus, Vocabulary
from .errors import ConfigError, DataError

NPMI_WINDOW_DEFAULT = 10
CV_WINDOW_DEFAULT = 110


@dataclass(frozen=True)
class TopicSet:
    """K topics, each the top-N vocabulary words of a beta row, descending."""

    topics: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        for i, topic in enumerate(self.topics):
            if len(set(topic)) != len(topic):
                raise ValueError(f"topic {i} has duplicate words")

    @property
    def k(self) -> int:
        return len(self.topics)


@dataclass
class CooccurrenceCounts:
    """Window statistics for a corpus partition.

    `counts` covers the full vocabulary; `joint` is a dense matrix over the
    counted word subset (the whole vocabulary when `subset` is None). The
    joint of a word with itself is its own window count.
    """

    window: int
    total_windows: int
    vocab: Vocabulary
    counts: np.ndarray
    joint_matrix: np.ndarray
    subset_pos: dict[int, int]

    def _pos(self, word: str) -> tuple[int, int]:
        idx = self.vocab.index.get(word)
        if idx is None:
            raise DataError(f"word {word!r} is not in the vocabulary")
        pos = self.subset_pos.get(idx)
        if pos is None:
            raise DataError(f"word {word!r} was not included in joint counting")
        return idx, pos

    def count(self, word: str) -> int:
        idx = self.vocab.index.get(word)
        if idx is None:
            raise DataError(f"word {word!r} is not in the vocabulary")
        return int(self.counts[idx])

    def joint(self, w1: str, w2: str) -> int:
        i1, p1 = self._pos(w1)
        i2, p2 = self._pos(w2)
        if i1 == i2:
            return int(self.counts[i1])
        return int(self.joint_matrix[p1, p2])


def count_cooccurrence(
    corpus: Corpus,
    vocab: Vocabulary,
    window: int,
    words: Sequence[str] | None = None,
) -> CooccurrenceCounts:
    """Boolean sliding-window counts over all documents of `corpus`.

    Stride is 1; a document shorter than `window` forms exactly one window.
    Windows slide over the raw token sequence, so out-of-vocabulary tokens
    occupy positions but are never counted. Restricting `words` limits the
    joint matrix to that subset (single-word counts always cover the full
    vocabulary).
    """
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    v = len(vocab.words)
    if words is None:
        subset = np.arange(v)
    else:
        missing = [w for w in words if w not in vocab.index]
        if missing:
            raise DataError(f"words not in vocabulary: {missing[:5]}")
        subset = np.array(sorted({vocab.index[w] for w in words}), dtype=np.int64)
    subset_pos = {int(idx): pos for pos, idx in enumerate(subset)}
    in_subset = np.full(v, -1, dtype=np.int64)
    in_subset[subset] = np.arange(subset.size)

    counts = np.zeros(v, dtype=np.int64)
    joint = np.zeros((subset.size, subset.size), dtype=np.int64)
    total_windows = 0
    for doc in corpus.documents:
        length = len(doc.tokens)
        if length == 0:
            continue
        ids = np.array([vocab.index.get(t, -1) for t in doc.tokens], dtype=np.int64)
        present_ids = np.unique(ids[ids >= 0])
        n_windows = max(1, length - window + 1)
        total_windows += n_windows
        if present_ids.size == 0:
            continue
        compact = {int(w): j for j, w in enumerate(present_ids)}
        hits = np.zeros((length + 1, present_ids.size), dtype=np.int64)
        for pos, wid in enumerate(ids):
            if wid >= 0:
                hits[pos + 1, compact[int(wid)]] += 1
        cum = np.cumsum(hits, axis=0)
        if length <= window:
            presence = (cum[length] > 0)[None, :]
        else:
            presence = (cum[window:] - cum[: length - window + 1]) > 0
        presence = presence.astype(np.int64)
        counts[present_ids] += presence.sum(axis=0)
        local = in_subset[present_ids]
        keep = local >= 0
        if keep.any():
            cols = presence[:, keep]
            joint[np.ix_(local[keep], local[keep])] += cols.T @ cols
    return CooccurrenceCounts(
        window=window,
        total_windows=total_windows,
        vocab=vocab,
        counts=counts,
        joint_matrix=joint,
        subset_pos=subset_pos,
    )


def npmi_pair(
    counts: CooccurrenceCounts, w1: str, w2: str, epsilon: float | None = None
) -> float:
    """log((P12+eps) / (P1*P2)) / -log(P12+eps), eps = 1/total_windows default.

    The smoothing enters the joint probability only. The result is kept in
    [-1, 1]: smoothing can push the raw quotient past 1 at perfect
    association (the overshoot vanishes as eps -> 0), and a smoothed joint
    at or above 1 makes the normalizer degenerate, so those cases saturate
    at 1 (0 when the numerator is also 0).
    """
    total = counts.total_windows
    if total == 0:
        raise DataError("no windows counted; corpus is empty")
    c1, c2 = counts.count(w1), counts.count(w2)
    if c1 == 0 or c2 == 0:
        zero = w1 if c1 == 0 else w2
        raise DataError(f"word {zero!r} appears in zero windows")
    eps = 1.0 / total if epsilon is None else float(epsilon)
    p1, p2 = c1 / total, c2 / total
    smoothed = counts.joint(w1, w2) / total + eps
    num = log(smoothed / (p1 * p2))
    if smoothed >= 1.0:
        return 1.0 if num > 0.0 else 0.0
    return min(1.0, max(-1.0, num / -log(smoothed)))


def npmi_topic(
    counts: CooccurrenceCounts, topic: Sequence[str], epsilon: float | None = None
) -> float:
    """Mean NPMI over all C(N,2) unordered word pairs of the topic."""
    if len(topic) < 2:
        raise ConfigError("a topic needs at least 2 words")
    vals = [
        npmi_pair(counts, topic[i], topic[j], epsilon)
        for i in range(len(topic))
        for j in range(i + 1, len(topic))
    ]
    return float(np.mean(vals))


def cv_topic(
    counts: CooccurrenceCounts,
    topic: Sequence[str],
    gamma: float = 1.0,
    epsilon: float | None = None,
) -> float:
    """One-set segmentation CV: mean cosine between per-word NPMI vectors
    and their sum. Vector components run over the whole topic, including the
    word itself (self-NPMI from joint(w,w) = count(w)). A zero vector scores
    cosine 0.
    """
    n = len(topic)
    if n < 2:
        raise ConfigError("a topic needs at least 2 words")
    m = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            m[i, j] = npmi_pair(counts, topic[i], topic[j], epsilon)
    vectors = np.power(m, gamma)
    topic_vec = vectors.sum(axis=0)
    tv_norm = float(np.linalg.norm(topic_vec))
    sims = []
    for i in range(n):
        v_norm = float(np.linalg.norm(vectors[i]))
        if v_norm == 0.0 or tv_norm == 0.0:
            sims.append(0.0)
        else:
            sims.append(float(vectors[i] @ topic_vec) / (v_norm * tv_norm))
    return float(np.mean(sims))


def extract_topics(model_or_beta, vocab: Vocabulary, top_n: int = 10) -> TopicSet:
    """Top-N words per beta row, descending weight, ties by vocabulary index."""
    beta = getattr(model_or_beta, "beta", model_or_beta)
    data = beta.data if hasattr(beta, "data") else beta
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2:
        raise ConfigError(f"expected a K x V topic-word matrix, got shape {data.shape}")
    k, v = data.shape
    if top_n > v:
        raise ConfigError(f"top_n={top_n} exceeds vocabulary size {v}")
    if top_n < 1:
        raise ConfigError("top_n must be >= 1")
    if v != len(vocab.words):
        raise ConfigError(f"beta width {v} != vocabulary size {len(vocab.words)}")
    idx = np.arange(v)
    topics = []
    for row in data:
        order = np.lexsort((idx, -row))
        topics.append(tuple(vocab.words[i] for i in order[:top_n]))
    return TopicSet(topics=tuple(topics))


@dataclass(frozen=True)
class OverlapPair:
    a_topic: int
    b_topic: int
    shared: tuple[str, ...]

    @property
    def overlap(self) -> int:
        return len(self.shared)


@dataclass(frozen=True)
class OverlapReport:
    pairs: tuple[OverlapPair, ...]
    unmatched_a: tuple[int, ...]
    unmatched_b: tuple[int, ...]

    @property
    def mean_overlap(self) -> float:
        if not self.pairs:
            return 0.0
        return float(np.mean([p.overlap for p in self.pairs]))

    @property
    def max_overlap(self) -> int:
        return max((p.overlap for p in self.pairs), default=0)


def topic_overlap(a: TopicSet, b: TopicSet) -> OverlapReport:
    """Greedy one-to-one alignment maximizing shared-word count.

    Pairs are picked by descending overlap, ties by smallest indices; with
    unequal K the min(K_a, K_b) pairs are aligned and the rest reported
    unmatched.
    """
    sets_a = [set(t) for t in a.topics]
    sets_b = [set(t) for t in b.topics]
    candidates = sorted(
        ((-len(sa & sb), i, j) for i, sa in enumerate(sets_a) for j, sb in enumerate(sets_b)),
    )
    used_a: set[int] = set()
    used_b: set[int] = set()
    pairs = []
    for neg, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        pairs.append(OverlapPair(i, j, tuple(sorted(sets_a[i] & sets_b[j]))))
        if len(pairs) == min(a.k, b.k):
            break
    pairs.sort(key=lambda p: p.a_topic)
    return OverlapReport(
        pairs=tuple(pairs),
        unmatched_a=tuple(i for i in range(a.k) if i not in used_a),
        unmatched_b=tuple(j for j in range(b.k) if j not in used_b),
    )


@dataclass(frozen=True)
class CoherenceReport:
    model: str
    k: int
    seed: int
    npmi_per_topic: tuple[float, ...]
    cv_per_topic: tuple[float, ...]

    @property
    def npmi_mean(self) -> float:
        return float(np.mean(self.npmi_per_topic))

    @property
    def cv_mean(self) -> float:
        return float(np.mean(self.cv_per_topic))

    def rows(self) -> list[list]:
        out = []
        for t, (np_v, cv_v) in enumerate(zip(self.npmi_per_topic, self.cv_per_topic)):
            out.append([self.model, self.k, self.seed, str(t), repr(np_v), repr(cv_v)])
        out.append([self.model, self.k, self.seed, "aggregate",
                    repr(self.npmi_mean), repr(self.cv_mean)])
        return out


def score_topics(
    model_tag: str,
    seed: int,
    topics: TopicSet,
    counts_npmi: CooccurrenceCounts,
    counts_cv: CooccurrenceCounts,
    gamma: float = 1.0,
) -> CoherenceReport:
    npmi_vals = tuple(npmi_topic(counts_npmi, t) for t in topics.topics)
    cv_vals = tuple(cv_topic(counts_cv, t, gamma=gamma) for t in topics.topics)
    return CoherenceReport(
        model=model_tag,
        k=topics.k,
        seed=seed,
        npmi_per_topic=npmi_vals,
        cv_per_topic=cv_vals,
    )


REPORT_COLUMNS = ("model", "K", "seed", "topic_id", "npmi", "cv")


def write_report_csv(path, reports: Sequence[CoherenceReport]) -> None:
    import csv

    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for report in reports:
                writer.writerows(report.rows())
    except OSError as exc:
        raise DataError(f"cannot write report {path}: {exc}") from exc
