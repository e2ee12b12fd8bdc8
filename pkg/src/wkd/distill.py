"""Distillation losses and the teacher-frozen student training loop.

The student minimizes (1-alpha) * L_VAE + alpha * L_KD where L_KD couples a
squared 2-Wasserstein term between the two diagonal Gaussian posteriors with
a temperature-scaled soft-label cross-entropy between decoder logits:
L_KD = L_2W + t^2 * L_CE. The teacher runs in eval mode off the tape and its
parameters are bit-unchanged by training.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .checkpoint import model_checksum
from .errors import ConfigError, DataError, NumericError, WkdError
from .nncore import AdamState, Tensor, no_grad, stream
from .nncore import tape
from .topicvae import (
    GaussianPosterior,
    LossBreakdown,
    TopicModel,
    decode,
    default_prior,
    encode,
    vae_forward,
)

HISTORY_COLUMNS = ("epoch", "nll", "kl", "kd_2w", "kd_ce", "kd_total", "total")


@dataclass(frozen=True)
class KdConfig:
    """Distillation hyperparameters; alpha and t default to tuning-range midpoints."""

    alpha: float = 0.5
    temperature: float = 2.0
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    lr: float = 2e-3
    use_2w: bool = True
    use_ce: bool = True
    shared_theta: bool = False
    teacher_ref: str = ""

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 2:
            raise ConfigError("batch size must be >= 2 (batchnorm needs 2+ rows)")
        if self.lr <= 0:
            raise ConfigError("learning rate must be positive")


class FrozenTeacher:
    """A trained model pinned in eval mode; a checksum guards the frozen contract."""

    def __init__(self, model: TopicModel):
        self.model = model
        self.checksum = model_checksum(model)

    def verify(self) -> bool:
        return model_checksum(self.model) == self.checksum

    def forward(self, bow: np.ndarray, ctx: np.ndarray):
        """Deterministic pass using the posterior mean: returns (mu, sigma, u)."""
        with no_grad():
            post = encode(self.model, bow, ctx, mode="eval")
            _, u, _ = decode(self.model, post.mu, mode="eval")
        return post.mu.data, np.exp(post.log_var.data * 0.5), u.data


# -- Wasserstein distances -------------------------------------------------


def _clamped_eigvalsh(cov: np.ndarray, check: bool) -> tuple[np.ndarray, np.ndarray]:
    sym = (cov + cov.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    if check and vals.min() < -1e-8:
        raise NumericError(f"covariance is not PSD: eigenvalue {vals.min():.3e} < -1e-8")
    return np.clip(vals, 0.0, None), vecs


def w2_squared_full(
    mu1: np.ndarray, cov1: np.ndarray, mu2: np.ndarray, cov2: np.ndarray
) -> float:
    """Squared 2-Wasserstein distance between two full-covariance Gaussians.

    ||mu1-mu2||^2 + tr(cov1 + cov2 - 2 (cov2^1/2 cov1 cov2^1/2)^1/2), with
    matrix square roots taken via symmetric eigendecomposition. Inputs are
    symmetrized; eigenvalues in [-1e-8, 0) are clamped to zero, anything
    below -1e-8 raises.
    """
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    cov1 = np.asarray(cov1, dtype=np.float64)
    cov2 = np.asarray(cov2, dtype=np.float64)
    n = mu1.shape[0]
    if mu2.shape != (n,) or cov1.shape != (n, n) or cov2.shape != (n, n):
        raise ValueError("mean/covariance shape mismatch")
    vals1, _ = _clamped_eigvalsh(cov1, check=True)
    vals2, vecs2 = _clamped_eigvalsh(cov2, check=True)
    root2 = (vecs2 * np.sqrt(vals2)) @ vecs2.T
    inner = root2 @ ((cov1 + cov1.T) / 2.0) @ root2
    # inner is PSD up to rounding; clamp without the strict check
    cross_vals, _ = _clamped_eigvalsh(inner, check=False)
    mean_term = float(np.sum((mu1 - mu2) ** 2))
    return mean_term + float(vals1.sum() + vals2.sum() - 2.0 * np.sqrt(cross_vals).sum())


def _w2_diag_from_stats(
    mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray, sigma2: np.ndarray
) -> float:
    d2 = ((mu1 - mu2) ** 2).sum(axis=-1) + ((sigma1 - sigma2) ** 2).sum(axis=-1)
    return float(d2 if d2.ndim == 0 else d2.mean())


def w2_squared_diag(
    mu1: np.ndarray, log_var1: np.ndarray, mu2: np.ndarray, log_var2: np.ndarray
) -> float:
    """Closed form for diagonal Gaussians: ||mu1-mu2||^2 + sum_k (s1_k - s2_k)^2.

    sigma = exp(log_var / 2). 1-D inputs give one distance; 2-D batches give
    the batch mean.
    """
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    if mu1.shape != mu2.shape:
        raise ValueError(f"posterior shape mismatch: {mu1.shape} vs {mu2.shape}")
    s1 = np.exp(np.asarray(log_var1, dtype=np.float64) / 2.0)
    s2 = np.exp(np.asarray(log_var2, dtype=np.float64) / 2.0)
    return _w2_diag_from_stats(mu1, s1, mu2, s2)


def _w2_diag_node(mu_t: np.ndarray, sigma_t: np.ndarray, post_s: GaussianPosterior) -> Tensor:
    """Batch-mean diagonal W2^2 with gradients flowing to the student posterior."""
    diff = post_s.mu - Tensor(mu_t)
    ds = tape.exp(post_s.log_var * 0.5) - Tensor(sigma_t)
    per_doc = tape.tsum(diff * diff, axis=1) + tape.tsum(ds * ds, axis=1)
    return per_doc.mean()


# -- soft-label cross-entropy ----------------------------------------------


def soft_ce(u_t: np.ndarray, u_s: np.ndarray, t: float) -> float:
    """Batch mean of -sum_v softmax(u_t/t)_v * log softmax(u_s/t)_v."""
    u_t = np.atleast_2d(np.asarray(u_t, dtype=np.float64))
    u_s = np.atleast_2d(np.asarray(u_s, dtype=np.float64))
    if u_t.shape != u_s.shape:
        raise ValueError(f"logit shape mismatch: {u_t.shape} vs {u_s.shape}")
    p = tape.softmax_array(u_t, temperature=t)
    logq = tape.log_softmax_array(u_s, temperature=t)
    return float(-(p * logq).sum(axis=1).mean())


def _soft_ce_node(u_t: np.ndarray, u_s: Tensor, t: float) -> Tensor:
    """Tape version; the teacher's soft labels enter as constants."""
    p = tape.softmax_array(u_t, temperature=t)
    logq = tape.log_softmax(u_s, temperature=t)
    return tape.tsum(logq * Tensor(p), axis=1).mean() * -1.0


# -- loss composition ------------------------------------------------------


def _as_mu_logvar(post) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(post, GaussianPosterior):
        return post.mu.data, post.log_var.data
    mu, log_var = post
    return np.asarray(mu, dtype=np.float64), np.asarray(log_var, dtype=np.float64)


def kd_loss(post_t, post_s, u_t: np.ndarray, u_s: np.ndarray, t: float,
            use_2w: bool = True, use_ce: bool = True):
    """Compose the distillation loss: kd_total = kd_2w + t^2 * kd_ce.

    Returns (kd_total, kd_2w, kd_ce). Posteriors may be GaussianPosterior
    values or (mu, log_var) array pairs. Ablation flags drop a term from
    kd_total; the component values are always reported.
    """
    mu_t, lv_t = _as_mu_logvar(post_t)
    mu_s, lv_s = _as_mu_logvar(post_s)
    kd_2w = w2_squared_diag(mu_t, lv_t, mu_s, lv_s)
    kd_ce = soft_ce(u_t, u_s, t)
    kd_total = (kd_2w if use_2w else 0.0) + (t * t * kd_ce if use_ce else 0.0)
    return kd_total, kd_2w, kd_ce


def total_student_loss(vae, kd_total: float, alpha: float) -> float:
    """(1-alpha) * vae_total + alpha * kd_total; vae may be a LossBreakdown."""
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha}")
    vae_total = vae.total_vae if isinstance(vae, LossBreakdown) else float(vae)
    return (1.0 - alpha) * vae_total + alpha * float(kd_total)


# -- training --------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    nll: float
    kl: float
    kd_2w: float
    kd_ce: float
    kd_total: float
    total: float

    def row(self) -> list:
        return [self.epoch, self.nll, self.kl, self.kd_2w, self.kd_ce,
                self.kd_total, self.total]


def write_history(path: str | Path, history: list[EpochStats]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(HISTORY_COLUMNS)
            for stats in history:
                writer.writerow([repr(float(v)) if isinstance(v, float) else v
                                 for v in stats.row()])
    except OSError as exc:
        raise DataError(f"cannot write history {path}: {exc}") from exc


def batch_indices(n: int, batch_size: int, rng: np.random.Generator):
    """Seeded-shuffle batches; a trailing single-document batch is dropped
    because train-mode batchnorm needs at least two rows."""
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        chunk = perm[start : start + batch_size]
        if chunk.size >= 2:
            yield chunk


class _KdContext:
    """Precomputed teacher-side targets plus the distillation config."""

    def __init__(self, teacher: FrozenTeacher, bow: np.ndarray, ctx: np.ndarray,
                 cfg: KdConfig, chunk: int = 1024):
        self.cfg = cfg
        self.teacher = teacher
        mus, sigmas, us = [], [], []
        for start in range(0, bow.shape[0], chunk):
            sl = slice(start, start + chunk)
            mu, sigma, u = teacher.forward(bow[sl], ctx[sl])
            mus.append(mu)
            sigmas.append(sigma)
            us.append(u)
        self.mu = np.concatenate(mus, axis=0)
        self.sigma = np.concatenate(sigmas, axis=0)
        self.u = np.concatenate(us, axis=0)

    def shared_theta_logits(self, theta_s: np.ndarray) -> np.ndarray:
        """Teacher logits rebuilt from the student's theta (detached targets)."""
        bn = self.teacher.model.decoder_norm
        raw = theta_s @ self.teacher.model.beta.data
        inv_std = 1.0 / np.sqrt(bn.running_var + bn.eps)
        return bn.scale.data * (raw - bn.running_mean) * inv_std + bn.shift.data


def compose_student_loss(g: dict, mu_t: np.ndarray, sigma_t: np.ndarray,
                         u_t: np.ndarray, cfg: KdConfig):
    """Combine a student forward pass with teacher targets into one tape node.

    `g` is a `vae_forward` result; the teacher statistics enter as constants.
    Returns (loss_node, metrics) where metrics is the float vector
    [nll, kl, kd_2w, kd_ce, kd_total, total]. The component values are
    always reported, while the ablation flags only shape the optimized node.
    Components that do enter the node are read back from it, so the metrics
    satisfy kd_total = kd_2w + t^2 kd_ce and total = (1-a) vae + a kd_total
    bit-for-bit. With alpha == 0 the distillation graph is never built, so
    the node is exactly the VAE total and the update trajectory matches
    plain training.
    """
    post_s = g["post"]
    kd_2w = _w2_diag_from_stats(mu_t, sigma_t, post_s.mu.data,
                                np.exp(post_s.log_var.data / 2.0))
    kd_ce = soft_ce(u_t, g["u"].data, cfg.temperature)
    loss_node = g["total"]
    if cfg.alpha > 0.0:
        terms = []
        if cfg.use_2w:
            w2_node = _w2_diag_node(mu_t, sigma_t, post_s)
            kd_2w = w2_node.item()
            terms.append(w2_node)
        if cfg.use_ce:
            ce_node = _soft_ce_node(u_t, g["u"], cfg.temperature)
            kd_ce = ce_node.item()
            terms.append(ce_node * (cfg.temperature ** 2))
        if terms:
            kd_node = terms[0]
            for extra in terms[1:]:
                kd_node = kd_node + extra
            loss_node = g["total"] * (1.0 - cfg.alpha) + kd_node * cfg.alpha
        else:
            loss_node = g["total"] * (1.0 - cfg.alpha)
    kd_total = ((kd_2w if cfg.use_2w else 0.0)
                + (cfg.temperature ** 2 * kd_ce if cfg.use_ce else 0.0))
    metrics = np.array([g["nll"].item(), g["kl"].item(), kd_2w, kd_ce,
                        kd_total, loss_node.item()])
    return loss_node, metrics


def _train_step(model, xb, cb, prior, noise, drop_rng, adam, kd, idx):
    g = vae_forward(model, xb, cb, prior, noise, mode="train", dropout_rng=drop_rng)
    if kd is None:
        loss_node = g["total"]
        metrics = np.array([g["nll"].item(), g["kl"].item(), 0.0, 0.0, 0.0,
                            loss_node.item()])
    else:
        cfg = kd.cfg
        u_t = kd.u[idx]
        if cfg.shared_theta:
            u_t = kd.shared_theta_logits(g["theta"].data)
        loss_node, metrics = compose_student_loss(g, kd.mu[idx], kd.sigma[idx],
                                                  u_t, cfg)
    adam.zero_grad()
    loss_node.backward()
    adam.step()
    return metrics


def _train_loop(model: TopicModel, bow: np.ndarray, ctx: np.ndarray,
                epochs: int, batch_size: int, seed: int, lr: float,
                kd: _KdContext | None) -> list[EpochStats]:
    bow = np.asarray(bow, dtype=np.float64)
    ctx = np.asarray(ctx, dtype=np.float64)
    n = bow.shape[0]
    if n < 2:
        raise DataError(f"training needs at least 2 documents, got {n}")
    if ctx.shape[0] != n:
        raise DataError(f"{n} BoW rows but {ctx.shape[0]} embedding rows")
    k = model.config.n_topics
    prior = default_prior(k)
    adam = AdamState(model.named_parameters(), lr=lr)
    history: list[EpochStats] = []
    for epoch in range(epochs):
        shuffle_rng = stream(seed, "shuffle", epoch)
        noise_rng = stream(seed, "noise", epoch)
        drop_rng = stream(seed, "dropout", epoch)
        sums = np.zeros(6)
        n_batches = 0
        for b, idx in enumerate(batch_indices(n, batch_size, shuffle_rng)):
            noise = noise_rng.standard_normal((idx.size, k))
            try:
                sums += _train_step(model, bow[idx], ctx[idx], prior, noise,
                                    drop_rng, adam, kd, idx)
            except NumericError as exc:
                raise NumericError(f"epoch {epoch} batch {b}: {exc}") from exc
            n_batches += 1
        if n_batches == 0:
            raise DataError("no usable batches; corpus too small for batch size")
        history.append(EpochStats(epoch, *map(float, sums / n_batches)))
    return history


def train_vae(model: TopicModel, bow: np.ndarray, ctx: np.ndarray, epochs: int,
              batch_size: int, seed: int, lr: float = 2e-3) -> list[EpochStats]:
    """Plain VAE training (teacher, or the no-distillation student baseline)."""
    return _train_loop(model, bow, ctx, epochs, batch_size, seed, lr, kd=None)


def train_student_with_kd(teacher: FrozenTeacher, student: TopicModel,
                          bow: np.ndarray, teacher_ctx: np.ndarray,
                          student_ctx: np.ndarray, cfg: KdConfig) -> list[EpochStats]:
    """Distill a frozen teacher into the student over a shared corpus.

    The teacher and student must share K and vocabulary width. With alpha=0
    the distillation graph is skipped entirely, so the parameter trajectory
    is bit-identical to train_vae under the same seed.
    """
    tk, sk = teacher.model.config.n_topics, student.config.n_topics
    if tk != sk:
        raise ConfigError(f"teacher K={tk} but student K={sk}")
    tv, sv = teacher.model.config.vocab_size, student.config.vocab_size
    if tv != sv:
        raise ConfigError(f"teacher V={tv} but student V={sv}")
    bow = np.asarray(bow, dtype=np.float64)
    teacher_ctx = np.asarray(teacher_ctx, dtype=np.float64)
    if teacher_ctx.shape[0] != bow.shape[0]:
        raise DataError(f"{bow.shape[0]} BoW rows but {teacher_ctx.shape[0]} "
                        "teacher embedding rows")
    kd = _KdContext(teacher, bow, teacher_ctx, cfg)
    history = _train_loop(student, bow, student_ctx, cfg.epochs, cfg.batch_size,
                          cfg.seed, cfg.lr, kd=kd)
    if not teacher.verify():
        raise WkdError("teacher parameters changed during distillation")
    return history
