"""
Gaussian-mixture flow matching.

The path runs in straight lines from the target item embedding x0 (t=0)
to the final domain-invariant user state x1 (t=1). A mixture head,
conditioned on the fused latent, the aligned prior and t, predicts a
distribution over x0. The ODE sampler converts the mixture mean into a
velocity and integrates from t=1 down to t=0.
"""
import os
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from autodiff import ops
from autodiff.graph import Graph, ParameterStore, Var
from autodiff.primitives import LOG_2PI
from config.run_config import FlowConfig
from core.exceptions import ConfigError, DomainError, EmptyDomainError, ShapeError


@dataclass
class FlowState:
    t: float
    x0: np.ndarray
    x1: np.ndarray
    xt: np.ndarray
    xbar: np.ndarray
    lam: float

    @classmethod
    def build(cls, x0: np.ndarray, x1: np.ndarray, t: float, lam: float) -> "FlowState":
        xt = interpolate(x0, x1, t)
        return cls(t=t, x0=x0, x1=x1, xt=xt, xbar=fuse_latent(xt, x1, lam), lam=lam)


@dataclass
class GaussianMixtureOutput:
    """Mixture over x0; arrays may carry leading batch dimensions."""
    logits: np.ndarray   # (..., K)
    weights: np.ndarray  # (..., K)
    means: np.ndarray    # (..., K, d)
    scales: np.ndarray   # (..., K)
    mean: np.ndarray     # (..., d)

    @property
    def num_components(self) -> int:
        return self.logits.shape[-1]

    @classmethod
    def from_components(cls, logits: np.ndarray, means: np.ndarray, scales: np.ndarray) -> "GaussianMixtureOutput":
        logits = np.asarray(logits, dtype=np.float64)
        z = np.exp(logits - logits.max(axis=-1, keepdims=True))
        weights = z / z.sum(axis=-1, keepdims=True)
        means = np.asarray(means, dtype=np.float64)
        mean = (weights[..., None] * means).sum(axis=-2)
        return cls(logits=logits, weights=weights, means=means,
                   scales=np.asarray(scales, dtype=np.float64), mean=mean)


@dataclass
class SolverConfig:
    steps: int
    lam: float = 0.5
    velocity_mode: str = "derived"

    def __post_init__(self):
        if self.steps < 1:
            raise ConfigError(f"solver steps must be at least 1, got {self.steps}")

    @property
    def dt(self) -> float:
        return 1.0 / self.steps


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


def interpolate(x0: np.ndarray, x1: np.ndarray, t: float) -> np.ndarray:
    """x_t = (1 - t) x0 + t x1; exact at both ends."""
    _check_unit("t", t)
    x0, x1 = np.asarray(x0, dtype=np.float64), np.asarray(x1, dtype=np.float64)
    if x0.shape != x1.shape:
        raise ShapeError(f"interpolate: {x0.shape} vs {x1.shape}")
    if t == 0.0:
        return x0.copy()
    if t == 1.0:
        return x1.copy()
    return (1.0 - t) * x0 + t * x1


def fuse_latent(xt: np.ndarray, x1: np.ndarray, lam: float) -> np.ndarray:
    """xbar = lam * xt + (1 - lam) * x1; exact at both ends."""
    _check_unit("lambda", lam)
    xt, x1 = np.asarray(xt, dtype=np.float64), np.asarray(x1, dtype=np.float64)
    if lam == 1.0:
        return xt.copy()
    if lam == 0.0:
        return x1.copy()
    return lam * xt + (1.0 - lam) * x1


def time_features(t: np.ndarray, size: int) -> np.ndarray:
    """Sinusoidal encoding of t in [0, 1]: (B,) -> (B, size)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    freqs = np.pi * 2.0 ** np.arange(size // 2)
    angles = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)


# Mixture head

@dataclass
class HeadVars:
    """Graph handles of one head evaluation."""
    logits: Var   # (B, K)
    means: Var    # (B, K, d)
    sigma: Var    # (B, K)
    mu: Var       # (B, d)

    def to_output(self) -> GaussianMixtureOutput:
        return GaussianMixtureOutput.from_components(
            self.logits.value.copy(), self.means.value.copy(), self.sigma.value.copy()
        )


def gmm_head_graph(xbar: Var, h_da: Var, t: np.ndarray, cfg: FlowConfig) -> HeadVars:
    """
    MLP([xbar || h_DA || time features]) -> logits, means, clamped scales, mixture mean.

    With `cfg.use_aligned_prior` off the h_DA slot is fed zeros, so the
    head conditions on the latent and t only.
    """
    g = xbar.graph
    B, d = xbar.shape
    K = cfg.num_components
    if not cfg.use_aligned_prior:
        h_da = g.constant(np.zeros(h_da.shape))
    inputs = ops.concat([xbar, h_da, g.constant(time_features(t, cfg.time_features))])
    hidden = ops.gelu(ops.linear(inputs, g.param("head.w1"), g.param("head.b1")))
    hidden = ops.gelu(ops.linear(hidden, g.param("head.w2"), g.param("head.b2")))

    logits = ops.linear(hidden, g.param("head.w_logit"), g.param("head.b_logit"))
    means = ops.reshape(ops.linear(hidden, g.param("head.w_mean"), g.param("head.b_mean")), (B, K, d))
    log_scale = ops.linear(hidden, g.param("head.w_logscale"), g.param("head.b_logscale"))
    sigma = ops.exp(ops.clip(log_scale, np.log(cfg.sigma_min), np.log(cfg.sigma_max)))

    weights = ops.reshape(ops.masked_softmax(logits), (B, 1, K))
    mu = ops.reshape(ops.matmul(weights, means), (B, d))
    return HeadVars(logits=logits, means=means, sigma=sigma, mu=mu)


def gmm_head(
    xbar: np.ndarray,
    h_DA: np.ndarray,
    t,
    params: ParameterStore,
    cfg: FlowConfig,
) -> GaussianMixtureOutput:
    """Evaluate the head on arrays; 1-D inputs are treated as a batch of one."""
    xbar = np.asarray(xbar, dtype=np.float64)
    h_DA = np.asarray(h_DA, dtype=np.float64)
    single = xbar.ndim == 1
    if single:
        xbar, h_DA = xbar[None], h_DA[None]
    if xbar.shape != h_DA.shape:
        raise ShapeError(f"gmm_head: xbar {xbar.shape} vs h_DA {h_DA.shape}")
    t = np.broadcast_to(np.asarray(t, dtype=np.float64), (xbar.shape[0],))
    graph = Graph(params)
    out = gmm_head_graph(graph.constant(xbar), graph.constant(h_DA), t, cfg).to_output()
    if single:
        return GaussianMixtureOutput(out.logits[0], out.weights[0], out.means[0], out.scales[0], out.mean[0])
    return out


def gmm_nll_graph(logits: Var, means: Var, sigma: Var, target: Var) -> Var:
    """Per-row -log sum_k A_k N(target; mu_k, sigma_k^2 I) as a (B,) Var."""
    log_density = ops.gaussian_log_density(target, means, sigma)
    joint = ops.logsumexp(logits + log_density)
    return ops.sub(ops.logsumexp(logits), joint)


def gmm_nll(mix: GaussianMixtureOutput, target: np.ndarray) -> np.ndarray:
    """Mixture negative log-likelihood of target (scalar, or per row for batched mixtures)."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape[-1] != mix.means.shape[-1]:
        raise ShapeError(f"gmm_nll: target dim {target.shape[-1]} vs mixture dim {mix.means.shape[-1]}")
    d = target.shape[-1]
    diff = target[..., None, :] - mix.means
    sq = (diff * diff).sum(axis=-1)
    log_n = -0.5 * d * LOG_2PI - d * np.log(mix.scales) - sq / (2.0 * mix.scales ** 2)
    log_a = mix.logits - _lse(mix.logits)[..., None]
    nll = -_lse(log_a + log_n)
    return float(nll) if nll.ndim == 0 else nll


def _lse(x: np.ndarray) -> np.ndarray:
    m = x.max(axis=-1, keepdims=True)
    return (m + np.log(np.exp(x - m).sum(axis=-1, keepdims=True)))[..., 0]


# GM-ODE sampler

HeadFn = Callable[[np.ndarray, np.ndarray, np.ndarray], GaussianMixtureOutput]


def gm_ode_solve(x1: np.ndarray, h_DA: np.ndarray, head: HeadFn, cfg: SolverConfig) -> np.ndarray:
    """
    First-order GM-ODE integration from t=1 to t=0.

    Each step fuses the current latent with x1, queries the head at t and
    moves along v = (mu - x)/t, written as a convex update so the final
    step (dt/t = 1) lands exactly on the predicted mean.

    Args:
        x1: (B, d) or (d,) final domain-invariant states
        h_DA: aligned priors, same shape as x1
        head: callable (xbar, h_DA, t) -> GaussianMixtureOutput
        cfg: step count, fusion weight and velocity reading

    Returns:
        Estimate of x0, same shape as x1
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x = x1.copy()
    T = cfg.steps
    dt = cfg.dt
    batch = x1.shape[0] if x1.ndim == 2 else 1
    for i in range(T):
        t = (T - i) / T
        xbar = fuse_latent(x, x1, cfg.lam)
        mix = head(xbar, h_DA, np.full(batch, t))
        if cfg.velocity_mode == "literal":
            x = x + dt * mix.mean
        else:
            ratio = dt / t
            x = (1.0 - ratio) * x + ratio * mix.mean
    return x


# Scoring

def score_items(xhat0: np.ndarray, item_embeddings: np.ndarray) -> np.ndarray:
    """Inner-product relevance of every candidate row."""
    item_embeddings = np.asarray(item_embeddings)
    if item_embeddings.shape[0] == 0:
        raise EmptyDomainError("no candidate items to score")
    if item_embeddings.shape[-1] != np.shape(xhat0)[-1]:
        raise ShapeError(f"score_items: dim {np.shape(xhat0)[-1]} vs {item_embeddings.shape[-1]}")
    return item_embeddings @ np.asarray(xhat0)


def rank_items(scores: np.ndarray) -> np.ndarray:
    """Candidate positions by descending score; ties go to the lower index."""
    return np.argsort(-np.asarray(scores), kind="stable")


def top_k(scores: np.ndarray, k: int) -> np.ndarray:
    return rank_items(scores)[:k]
