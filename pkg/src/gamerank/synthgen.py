"""Synthetic multi-agent gaming data with a tunable confounding knob.

Each agent p draws covariates from its own Gaussian whose mean is an
affine map of log(lambda_p); ground-truth decisions follow a shared
logistic model of the covariates; observed decisions are Bernoulli
draws from the agent's utility-maximizing (gamed) rate. Increasing
``mean_range`` couples agent identity to the covariate distribution,
which is what eventually breaks payout-only rankings.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .core import AgentSpec, Dataset, Ranking, Rng, format_float
from .strategic import CostSpec, RewardSpec, optimal_response

__all__ = [
    "DEFAULT_LAMBDAS",
    "DEFAULT_LAMBDA_SCALE",
    "SynthConfig",
    "LabeledDataset",
    "TrueResponseModel",
    "agent_means",
    "generate_dataset",
    "ground_truth_ranking",
    "write_metadata",
    "read_metadata",
]

# Hand-picked deterrence values, one per agent, ascending. The published
# list carries a trailing 21st value (0.3) despite describing 20 agents;
# we keep the first 20.
DEFAULT_LAMBDAS: tuple[float, ...] = (
    0.001, 0.003, 0.005, 0.007, 0.009, 0.01, 0.015, 0.02, 0.025, 0.03,
    0.035, 0.04, 0.045, 0.05, 0.06, 0.07, 0.08, 0.09, 0.1, 0.2,
)

# Multiplier applied to the lambda list before solving the best
# response. The raw values are all below the interior-solution threshold
# of the log+quadratic utility (their responses saturate at rate 1.0, a
# degenerate dataset); this scale puts every agent in the interior
# regime where gamed rates sit a few points above the ~5% base rate and
# confounding can overpower the gaming signal. Rankings are unaffected:
# the scale is monotone and the confounding map uses min-max scaled
# log-lambda, which is shift-invariant.
DEFAULT_LAMBDA_SCALE = 250_000.0


@dataclass(frozen=True)
class SynthConfig:
    """Generator parameters; defaults reproduce the benchmark design."""

    lambdas: tuple[float, ...] = DEFAULT_LAMBDAS
    per_agent_count: int = 500
    mean_range: float = 1.0
    mean_offset: float = -1.0
    sigma2: float = 1.0
    covariate_dim: int = 2
    target_base_rate: float = 0.05
    reward: RewardSpec = field(default_factory=RewardSpec.log)
    cost: CostSpec = field(default_factory=CostSpec.quadratic)
    # "rate": plug the true decision probability into the best response
    # (the observed rate then dominates the true rate record by record).
    # "binary": plug the realized binary ground-truth decision in.
    gaming_mode: str = "rate"
    lambda_scale: float = DEFAULT_LAMBDA_SCALE

    def __post_init__(self) -> None:
        if not self.lambdas:
            raise ValueError("lambdas must be non-empty")
        if any(not l > 0 for l in self.lambdas):
            raise ValueError("all lambdas must be > 0")
        if self.per_agent_count <= 0:
            raise ValueError("per_agent_count must be positive")
        if self.mean_range < 0:
            raise ValueError("mean_range must be >= 0")
        if len(set(self.lambdas)) == 1 and self.mean_range > 0:
            raise ValueError(
                "mean_range must be 0 when all lambdas are equal "
                "(min-max scale of log-lambda is undefined)"
            )
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if self.covariate_dim <= 0:
            raise ValueError("covariate_dim must be positive")
        if not 0 < self.target_base_rate < 1:
            raise ValueError("target_base_rate must be in (0, 1)")
        if self.gaming_mode not in ("rate", "binary"):
            raise ValueError(f"unknown gaming_mode {self.gaming_mode!r}")
        if not self.lambda_scale > 0:
            raise ValueError("lambda_scale must be positive")

    @property
    def n_agents(self) -> int:
        return len(self.lambdas)

    def with_mean_range(self, mean_range: float) -> "SynthConfig":
        return replace(self, mean_range=float(mean_range))


@dataclass(frozen=True)
class LabeledDataset:
    """A generated dataset plus everything needed to score rankings."""

    dataset: Dataset
    truth_order: Ranking
    weights_w: np.ndarray
    offset_b_d: float


def agent_means(
    lambdas: Sequence[float],
    mean_range: float,
    mean_offset: float,
    covariate_dim: int = 2,
) -> np.ndarray:
    """Per-agent covariate means: min-max scaled log-lambda, broadcast.

    The scalar map mean_range * scaled(log lam) + mean_offset is copied
    into every coordinate, so each coordinate spans exactly mean_range
    across agents.
    """
    lam = np.asarray(lambdas, dtype=float)
    if lam.size == 0 or np.any(lam <= 0):
        raise ValueError("lambdas must be non-empty and positive")
    if mean_range == 0:
        scalar = np.full(lam.size, mean_offset, dtype=float)
    else:
        log_lam = np.log(lam)
        span = log_lam.max() - log_lam.min()
        if span == 0:
            raise ValueError("all lambdas equal: min-max scale undefined")
        scalar = mean_range * (log_lam - log_lam.min()) / span + mean_offset
    return np.repeat(scalar[:, None], covariate_dim, axis=1)


def ground_truth_ranking(config: SynthConfig) -> Ranking:
    """Agents sorted by ascending lambda (most gaming-prone first)."""
    order = sorted(range(config.n_agents), key=lambda i: (config.lambdas[i], i))
    return Ranking(tuple(order))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def generate_dataset(config: SynthConfig, rng: Rng) -> LabeledDataset:
    """Draw one full dataset under ``config``.

    Draw order is fixed (covariates agent by agent, then the outcome
    weights, then both Bernoulli layers) so a seed pins the dataset
    bit for bit.
    """
    g = rng.generator()
    P = config.n_agents
    m = config.per_agent_count
    n = P * m
    dim = config.covariate_dim
    means = agent_means(config.lambdas, config.mean_range, config.mean_offset, dim)

    x = np.empty((n, dim))
    p = np.repeat(np.arange(P), m)
    for a in range(P):
        block = slice(a * m, (a + 1) * m)
        x[block] = means[a] + np.sqrt(config.sigma2) * g.standard_normal((m, dim))

    w = g.uniform(0.0, 1.0, size=dim)
    logit_target = np.log(config.target_base_rate / (1.0 - config.target_base_rate))
    b_d = logit_target - float(np.mean(x @ w))
    alpha_star = _sigmoid(x @ w + b_d)
    d_star = (g.uniform(size=n) < alpha_star).astype(np.int64)

    alpha_gamed = np.empty(n)
    for a in range(P):
        block = slice(a * m, (a + 1) * m)
        lam = config.lambda_scale * config.lambdas[a]
        basis = alpha_star[block] if config.gaming_mode == "rate" else d_star[block].astype(float)
        alpha_gamed[block] = optimal_response(config.reward, config.cost, lam, basis)
    d = (g.uniform(size=n) < alpha_gamed).astype(np.int64)

    agents = tuple(AgentSpec(a, float(config.lambdas[a])) for a in range(P))
    ds = Dataset(
        x=x, d=d, p=p, agents=agents,
        d_star=d_star.astype(float), alpha_star=alpha_star, alpha_gamed=alpha_gamed,
    )
    return LabeledDataset(
        dataset=ds,
        truth_order=ground_truth_ranking(config),
        weights_w=w,
        offset_b_d=b_d,
    )


@dataclass(frozen=True)
class TrueResponseModel:
    """The generator's own decision-rate function E[d | x, agent].

    Serves as the oracle counterpart of fitted outcome models: it
    exposes the same ``predict(x, agent_id)`` surface but evaluates the
    exact best response instead of an estimate.
    """

    config: SynthConfig
    weights_w: np.ndarray
    offset_b_d: float

    @staticmethod
    def for_dataset(config: SynthConfig, labeled: LabeledDataset) -> "TrueResponseModel":
        return TrueResponseModel(config, labeled.weights_w, labeled.offset_b_d)

    def alpha_star(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return _sigmoid(x @ self.weights_w + self.offset_b_d)

    def predict(self, x: np.ndarray, agent_id: int) -> np.ndarray:
        cfg = self.config
        if not 0 <= agent_id < cfg.n_agents:
            raise ValueError(f"unknown agent id {agent_id}")
        lam = cfg.lambda_scale * cfg.lambdas[agent_id]
        a_star = self.alpha_star(x)
        if cfg.gaming_mode == "rate":
            return optimal_response(cfg.reward, cfg.cost, lam, a_star)
        # Binary mode: the conditional rate mixes the two best responses
        # to the realized ground-truth decision.
        r1 = optimal_response(cfg.reward, cfg.cost, lam, 1.0)
        r0 = optimal_response(cfg.reward, cfg.cost, lam, 0.0)
        return a_star * r1 + (1.0 - a_star) * r0


def write_metadata(path, config: SynthConfig, seed_label: str, w: np.ndarray, b_d: float) -> None:
    """Key-value sidecar recording how a dataset file was produced."""
    lines = [
        f"seed = {seed_label}",
        f"lambdas = {','.join(format_float(l) for l in config.lambdas)}",
        f"lambda_scale = {format_float(config.lambda_scale)}",
        f"per_agent_count = {config.per_agent_count}",
        f"mean_range = {format_float(config.mean_range)}",
        f"mean_offset = {format_float(config.mean_offset)}",
        f"sigma2 = {format_float(config.sigma2)}",
        f"covariate_dim = {config.covariate_dim}",
        f"target_base_rate = {format_float(config.target_base_rate)}",
        f"reward = {config.reward.describe()}",
        f"cost = {config.cost.describe()}",
        f"gaming_mode = {config.gaming_mode}",
        f"w = {','.join(format_float(v) for v in w)}",
        f"b_d = {format_float(b_d)}",
    ]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_metadata(path) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if "=" in line:
                key, val = line.split("=", 1)
                out[key.strip()] = val.strip()
    return out
