"""The two VAE topic-model architectures and their training loss.

The teacher ("combined") encodes the concatenation of a document's
normalized BoW vector and its contextual embedding projected to vocabulary
width; the student ("zeroshot") encodes the projected embedding alone.
Both decode through theta = softmax(z) and a topic-word matrix followed by
batch normalization (frozen scale) and a final softmax over the vocabulary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import nncore
from .errors import ConfigError
from .nncore import BatchNormState, DenseLayer, Tensor, dropout
from .nncore import tape

ARCHITECTURES = ("combined", "zeroshot")


@dataclass
class GaussianPosterior:
    """Diagonal Gaussian over the latent topic space: (batch, K) mean and log-variance."""

    mu: Tensor
    log_var: Tensor

    def sigma(self) -> Tensor:
        return tape.exp(self.log_var * 0.5)


@dataclass(frozen=True)
class PriorParams:
    mu_p: np.ndarray
    var_p: np.ndarray
    alpha: float


@dataclass
class LossBreakdown:
    nll: float
    kl: float
    total_vae: float
    kd_2w: Optional[float] = None
    kd_ce: Optional[float] = None
    kd_total: Optional[float] = None
    total_student: Optional[float] = None


def laplace_prior(n_topics: int, alpha: float) -> PriorParams:
    """Gaussian approximation of a symmetric Dirichlet prior in softmax basis.

    var_k = (1/alpha)(1 - 2/K) + 1/(K*alpha); the mean is zero because the
    concentration is symmetric.
    """
    if n_topics < 1:
        raise ValueError("n_topics must be >= 1")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    var = (1.0 / alpha) * (1.0 - 2.0 / n_topics) + 1.0 / (n_topics * alpha)
    return PriorParams(
        mu_p=np.zeros(n_topics),
        var_p=np.full(n_topics, var),
        alpha=alpha,
    )


def default_prior(n_topics: int) -> PriorParams:
    return laplace_prior(n_topics, 1.0 / n_topics)


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    n_topics: int
    vocab_size: int
    ctx_dim: int
    hidden_sizes: tuple[int, ...] = (100,)
    dropout: float = 0.2

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.architecture!r}")
        if self.n_topics < 1 or self.vocab_size < 1 or self.ctx_dim < 1:
            raise ConfigError("n_topics, vocab_size, and ctx_dim must be >= 1")
        if not self.hidden_sizes:
            raise ConfigError("at least one hidden layer is required")


class TopicModel:
    """Parameters and forward passes for one VAE topic model.

    Both architectures carry a ctx_dim -> V embedding projection; the
    combined encoder input is 2V wide (normalized BoW concatenated with the
    projection), the zeroshot input is the V-wide projection alone.
    """

    def __init__(self, config: ModelConfig, seed: int = 0):
        self.config = config
        k, v, d = config.n_topics, config.vocab_size, config.ctx_dim

        def init_rng(name):
            return nncore.stream(seed, f"init:{name}")

        self.ctx_projection = DenseLayer(d, v, init_rng("ctx_projection"))
        in_width = 2 * v if config.architecture == "combined" else v
        self.encoder: list[DenseLayer] = []
        prev = in_width
        for i, width in enumerate(config.hidden_sizes):
            self.encoder.append(DenseLayer(prev, width, init_rng(f"encoder.{i}")))
            prev = width
        self.mu_head = DenseLayer(prev, k, init_rng("mu_head"))
        self.log_var_head = DenseLayer(prev, k, init_rng("log_var_head"))

        limit = np.sqrt(6.0 / (k + v))
        beta0 = init_rng("beta").uniform(-limit, limit, size=(k, v))
        self.beta = Tensor(beta0, requires_grad=True)
        self.decoder_norm = BatchNormState(v, learn_scale=False)

    @property
    def encoder_input_width(self) -> int:
        return self.encoder[0].in_dim

    def named_parameters(self) -> list[tuple[str, Tensor]]:
        out = self.ctx_projection.named_parameters("ctx_projection")
        for i, layer in enumerate(self.encoder):
            out += layer.named_parameters(f"encoder.{i}")
        out += self.mu_head.named_parameters("mu_head")
        out += self.log_var_head.named_parameters("log_var_head")
        out.append(("beta", self.beta))
        out += self.decoder_norm.named_parameters("decoder_norm")
        return out

    def named_buffers(self) -> list[tuple[str, np.ndarray]]:
        out = []
        for name, arr in self.decoder_norm.named_buffers("decoder_norm"):
            out.append((name, arr.data if isinstance(arr, Tensor) else arr))
        return out

    def zero_grad(self) -> None:
        nncore.zero_grads(p for _, p in self.named_parameters())


def _normalize_rows(counts: np.ndarray) -> np.ndarray:
    totals = counts.sum(axis=1, keepdims=True)
    safe = np.where(totals > 0, totals, 1.0)
    return counts / safe


def encode(
    model: TopicModel,
    bow: np.ndarray | None,
    ctx: np.ndarray | None,
    mode: str = "eval",
    dropout_rng: np.random.Generator | None = None,
) -> GaussianPosterior:
    """Run the encoder; `bow` carries raw counts and is normalized internally."""
    cfg = model.config
    if ctx is None:
        raise ConfigError("encoder requires contextual embeddings")
    ctx = np.asarray(ctx, dtype=np.float64)
    if ctx.ndim != 2 or ctx.shape[1] != cfg.ctx_dim:
        raise ConfigError(f"expected ctx of width {cfg.ctx_dim}, got shape {ctx.shape}")
    proj = model.ctx_projection(Tensor(ctx))
    if cfg.architecture == "combined":
        if bow is None:
            raise ConfigError("combined architecture requires BoW input")
        bow = np.asarray(bow, dtype=np.float64)
        if bow.ndim != 2 or bow.shape[1] != cfg.vocab_size:
            raise ConfigError(f"expected BoW of width {cfg.vocab_size}, got shape {bow.shape}")
        h = tape.concat_cols(Tensor(_normalize_rows(bow)), proj)
    else:
        h = proj
    for layer in model.encoder:
        h = nncore.softplus(layer(h))
    h = dropout(h, cfg.dropout, dropout_rng, training=(mode == "train"))
    return GaussianPosterior(mu=model.mu_head(h), log_var=model.log_var_head(h))


def reparameterize(post: GaussianPosterior, noise: np.ndarray) -> Tensor:
    """z = mu + exp(log_var / 2) * noise."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != post.mu.data.shape:
        raise ValueError(f"noise shape {noise.shape} != posterior shape {post.mu.data.shape}")
    return post.mu + post.sigma() * Tensor(noise)


def decode(model: TopicModel, z: Tensor, mode: str = "eval"):
    """Return (theta, u, recon): topic mixture, normed logits, vocab simplex."""
    theta = nncore.softmax(tape.astensor(z), temperature=1.0, axis=-1)
    u = model.decoder_norm(tape.matmul(theta, model.beta), mode)
    recon = nncore.softmax(u, temperature=1.0, axis=-1)
    return theta, u, recon


def kl_to_prior(post: GaussianPosterior, prior: PriorParams) -> Tensor:
    """Batch-mean KL(q || p) between diagonal Gaussians and the fixed prior."""
    if post.mu.data.shape[1] != prior.mu_p.shape[0]:
        raise ValueError("posterior/prior dimension mismatch")
    inv_var_p = 1.0 / prior.var_p
    var = tape.exp(post.log_var)
    diff = post.mu - Tensor(prior.mu_p)
    const = float(np.sum(np.log(prior.var_p)) - prior.mu_p.shape[0])
    per_doc = (
        tape.tsum(var * Tensor(inv_var_p), axis=1)
        + tape.tsum(diff * diff * Tensor(inv_var_p), axis=1)
        - tape.tsum(post.log_var, axis=1)
        + const
    )
    return per_doc.mean() * 0.5


def nll(recon: Tensor, bow_counts: np.ndarray) -> Tensor:
    """Mean multinomial negative log-likelihood over documents with tokens.

    Zero-count documents contribute nothing and are excluded from the mean.
    """
    counts = np.asarray(bow_counts, dtype=np.float64)
    recon = tape.astensor(recon)
    if counts.shape != recon.data.shape:
        raise ValueError(f"counts shape {counts.shape} != recon shape {recon.data.shape}")
    keep = counts.sum(axis=1) > 0
    n_kept = int(keep.sum())
    if n_kept == 0:
        return tape.astensor(0.0)
    per_doc = tape.tsum(tape.log(recon) * Tensor(counts), axis=1)
    return tape.tsum(per_doc * Tensor(keep.astype(np.float64))) * (-1.0 / n_kept)


def vae_forward(
    model: TopicModel,
    bow_counts: np.ndarray,
    ctx: np.ndarray,
    prior: PriorParams,
    noise: np.ndarray,
    mode: str = "train",
    dropout_rng: np.random.Generator | None = None,
):
    """Full pass returning tape nodes (nll, kl, total) plus intermediates."""
    post = encode(model, bow_counts, ctx, mode=mode, dropout_rng=dropout_rng)
    z = reparameterize(post, noise)
    theta, u, recon = decode(model, z, mode=mode)
    nll_node = nll(recon, bow_counts)
    kl_node = kl_to_prior(post, prior)
    total = nll_node + kl_node
    return {"post": post, "theta": theta, "u": u, "recon": recon,
            "nll": nll_node, "kl": kl_node, "total": total}


def vae_loss(
    model: TopicModel,
    bow_counts: np.ndarray,
    ctx: np.ndarray,
    prior: PriorParams,
    noise: np.ndarray,
    mode: str = "train",
    dropout_rng: np.random.Generator | None = None,
) -> LossBreakdown:
    g = vae_forward(model, bow_counts, ctx, prior, noise, mode=mode, dropout_rng=dropout_rng)
    nll_v = g["nll"].item()
    kl_v = g["kl"].item()
    return LossBreakdown(nll=nll_v, kl=kl_v, total_vae=nll_v + kl_v)


@dataclass(frozen=True)
class ParamCount:
    trainable: int
    buffers: int

    @property
    def total(self) -> int:
        return self.trainable + self.buffers

    @property
    def bytes(self) -> int:
        return 4 * self.total

    @property
    def bytes_trainable(self) -> int:
        return 4 * self.trainable


def count_parameters(model: TopicModel) -> ParamCount:
    """Exact trainable-parameter and persistent-buffer counts (4 bytes each)."""
    trainable = sum(p.data.size for _, p in model.named_parameters())
    buffers = sum(b.size for _, b in model.named_buffers())
    return ParamCount(trainable=trainable, buffers=buffers)


def compression_ratio(teacher: ParamCount, student: ParamCount) -> float:
    """Fraction of teacher bytes removed: 1 - student_bytes / teacher_bytes."""
    return 1.0 - student.bytes / teacher.bytes
