"""Reward/cost algebra and the agent best-response machinery.

An agent facing reward R and cost c with deterrence parameter lam picks
the observed decision rate

    argmax over dbar in [0, 1] of  R(dbar) - lam * c(dbar - d_star).

Closed forms exist for the affine+quadratic and log+quadratic pairs;
anything else falls back to a golden-section maximizer. The module also
exposes the sharp lower bound R'(delta)/c'(delta) on lam recoverable
from an observed rate alone, and the interval-based epsilon-gaming
verdict built on top of it.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import partial
from typing import Callable

import numpy as np

__all__ = [
    "AssumptionError",
    "RewardSpec",
    "CostSpec",
    "Verdict",
    "GamingInterval",
    "AssumptionReport",
    "optimal_response",
    "lambda_lower_bound",
    "epsilon_gaming_verdict",
    "check_assumptions",
    "golden_section_max",
]

# Absolute tolerance of the numeric 1-D maximizer.
SOLVER_TOL = 1e-9
_SOLVER_MAX_ITER = 200
# Lower edge of the search interval for rewards undefined at 0 (log).
_LOG_FLOOR = 1e-12


class AssumptionError(ValueError):
    """A reward/cost function violates the shape assumptions."""


# Module-level evaluators keep the builtin specs picklable, which the
# parallel harness relies on.
def _affine_value(a: float, b: float, x):
    return a * np.asarray(x, float) + b


def _affine_deriv(a: float, x):
    return np.full_like(np.asarray(x, float), a)


def _log_value(x):
    return np.log(np.asarray(x, float))


def _log_deriv(x):
    return 1.0 / np.asarray(x, float)


def _quadratic_value(x):
    return np.asarray(x, float) ** 2


def _quadratic_deriv(x):
    return 2.0 * np.asarray(x, float)


@dataclass(frozen=True)
class RewardSpec:
    """Strictly increasing, concave payout function of the decision rate."""

    kind: str  # "affine" | "log" | "custom"
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]
    a: float = 1.0
    b: float = 0.0

    @staticmethod
    def affine(a: float = 1.0, b: float = 0.0) -> "RewardSpec":
        if not a > 0:
            raise ValueError("affine reward slope must be > 0")
        return RewardSpec(
            "affine", partial(_affine_value, a, b), partial(_affine_deriv, a), a=a, b=b
        )

    @staticmethod
    def log() -> "RewardSpec":
        return RewardSpec("log", _log_value, _log_deriv)

    @staticmethod
    def custom(value: Callable, deriv: Callable) -> "RewardSpec":
        return RewardSpec("custom", value, deriv)

    def describe(self) -> str:
        if self.kind == "affine":
            return f"affine(a={self.a:g}, b={self.b:g})"
        return self.kind


@dataclass(frozen=True)
class CostSpec:
    """Strictly convex manipulation cost with c(0) = 0 and c'(0) = 0."""

    kind: str  # "quadratic" | "custom"
    value: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    @staticmethod
    def quadratic() -> "CostSpec":
        return CostSpec("quadratic", _quadratic_value, _quadratic_deriv)

    @staticmethod
    def custom(value: Callable, deriv: Callable) -> "CostSpec":
        return CostSpec("custom", value, deriv)

    def describe(self) -> str:
        return self.kind


class Verdict(enum.Enum):
    GAMING = "gaming"
    NOT_GAMING = "not_gaming"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class GamingInterval:
    """Estimated lam interval vs. the epsilon-gaming threshold interval.

    Both bound pairs are stored in ascending order regardless of the
    direction they were derived in.
    """

    lambda_hat_lo: float
    lambda_hat_hi: float
    threshold_lo: float
    threshold_hi: float
    verdict: Verdict

    def __post_init__(self) -> None:
        if self.lambda_hat_lo > self.lambda_hat_hi:
            raise ValueError("lambda_hat bounds out of order")
        if self.threshold_lo > self.threshold_hi:
            raise ValueError("threshold bounds out of order")


def golden_section_max(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = SOLVER_TOL,
    max_iter: int = _SOLVER_MAX_ITER,
) -> float:
    """Maximize a unimodal f on [lo, hi] to absolute argument tolerance."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _concavity_spot_check(
    reward: RewardSpec, cost: CostSpec, lam: float, d_star: float, lo: float, hi: float
) -> None:
    # Cheap guard for custom functions: the objective must not be convex
    # anywhere on a coarse grid of the search interval.
    grid = np.linspace(lo, hi, 9)
    obj = reward.value(grid) - lam * cost.value(grid - d_star)
    second = np.diff(obj, 2)
    if np.any(second > 1e-8 * max(1.0, np.max(np.abs(obj)))):
        raise AssumptionError(
            "objective is not concave on the search interval; "
            "custom reward/cost violates the shape assumptions"
        )


def optimal_response(
    reward: RewardSpec,
    cost: CostSpec,
    lam: float,
    d_star: float | np.ndarray,
):
    """Utility-maximizing observed rate for ground truth rate(s) d_star.

    Returns the unique maximizer of R(dbar) - lam*c(dbar - d_star) over
    [0, 1]; always >= d_star. Vectorized over d_star for the two
    closed-form reward/cost pairs.
    """
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    arr = np.asarray(d_star, dtype=float)
    if np.any(arr < 0) or np.any(arr > 1):
        raise ValueError("d_star must lie in [0, 1]")
    scalar = np.isscalar(d_star) or arr.ndim == 0

    if cost.kind == "quadratic" and reward.kind == "affine":
        out = np.minimum(arr + reward.a / (2.0 * lam), 1.0)
    elif cost.kind == "quadratic" and reward.kind == "log":
        out = np.minimum(0.5 * (arr + np.sqrt(arr * arr + 2.0 / lam)), 1.0)
    else:
        def solve_one(ds: float) -> float:
            lo = ds
            if reward.kind == "log":
                lo = max(lo, _LOG_FLOOR)
            if lo >= 1.0:
                return 1.0
            _concavity_spot_check(reward, cost, lam, ds, lo, 1.0)
            f = lambda dbar: float(reward.value(dbar) - lam * cost.value(dbar - ds))
            best = golden_section_max(f, lo, 1.0)
            # Remark-level guarantee: never report less than the truth.
            return max(best, ds)

        out = np.vectorize(solve_one)(arr)
    # The optimum is never below d_star: cost is minimized at 0 and the
    # reward strictly increases.
    out = np.maximum(out, arr)
    return float(out) if scalar else out


def lambda_lower_bound(
    reward: RewardSpec, cost: CostSpec, delta_obs: float
) -> float:
    """Sharp lower bound R'(delta)/c'(delta) on lam from an observed rate.

    Attained when the entire observed rate is manipulation (d_star = 0).
    """
    if not delta_obs > 0:
        raise ValueError("observed rate must be > 0 (cost derivative vanishes at 0)")
    cd = float(cost.deriv(delta_obs))
    if not cd > 0:
        raise ValueError(f"cost derivative must be > 0 at {delta_obs}, got {cd}")
    return float(reward.deriv(delta_obs)) / cd


def epsilon_gaming_verdict(
    reward: RewardSpec,
    cost: CostSpec,
    epsilon: float,
    delta_obs: float,
    d_star_bounds: tuple[float, float],
) -> GamingInterval:
    """Interval test for manipulating the rate by more than epsilon.

    Given bounds [lo, hi] on the unknown ground-truth rate, compares the
    implied lam interval against the agent-specific threshold interval
    R'(epsilon + d_star)/c'(epsilon). The verdict is decisive only when
    the two intervals do not overlap.
    """
    lo, hi = float(d_star_bounds[0]), float(d_star_bounds[1])
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    if not 0 <= lo <= hi:
        raise ValueError("d_star bounds must satisfy 0 <= lo <= hi")
    if hi >= delta_obs:
        raise ValueError("d_star upper bound must be < observed rate")

    r_at_obs = float(reward.deriv(delta_obs))
    lam_pair = sorted(
        (r_at_obs / float(cost.deriv(delta_obs - lo)),
         r_at_obs / float(cost.deriv(delta_obs - hi)))
    )
    c_at_eps = float(cost.deriv(epsilon))
    thr_pair = sorted(
        (float(reward.deriv(epsilon + hi)) / c_at_eps,
         float(reward.deriv(epsilon + lo)) / c_at_eps)
    )
    if lam_pair[1] < thr_pair[0]:
        verdict = Verdict.GAMING
    elif lam_pair[0] > thr_pair[1]:
        verdict = Verdict.NOT_GAMING
    else:
        verdict = Verdict.INCONCLUSIVE
    return GamingInterval(lam_pair[0], lam_pair[1], thr_pair[0], thr_pair[1], verdict)


@dataclass(frozen=True)
class AssumptionReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def check_assumptions(
    reward: RewardSpec, cost: CostSpec, grid_size: int
) -> AssumptionReport:
    """Numerically screen R and c on [0, 1] for the shape assumptions.

    Report-only: flags non-increasing or non-concave reward, non-convex
    cost, c(0) != 0, and c'(0) != 0.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be >= 3")
    eps = 1e-7
    lo = _LOG_FLOOR if reward.kind == "log" else 0.0
    grid = np.linspace(lo if lo > 0 else 1e-6, 1.0, grid_size)
    violations: list[str] = []

    r = np.asarray(reward.value(grid), dtype=float)
    if np.any(np.diff(r) <= 0):
        violations.append("reward is not strictly increasing on [0, 1]")
    if np.any(np.diff(r, 2) > eps * max(1.0, float(np.max(np.abs(r))))):
        violations.append("reward is not concave on [0, 1]")

    c = np.asarray(cost.value(grid), dtype=float)
    if np.any(np.diff(c, 2) <= 0):
        violations.append("cost is not strictly convex on [0, 1]")
    c0 = float(cost.value(0.0))
    if abs(c0) > eps:
        violations.append(f"cost at 0 is {c0:g}, expected 0")
    # One-sided differences: a kink at 0 (e.g. |x|) hides from the
    # central difference but not from either side.
    h = 1e-6
    fwd = (float(cost.value(h)) - c0) / h
    bwd = (c0 - float(cost.value(-h))) / h
    if abs(fwd) > 1e-3 or abs(bwd) > 1e-3:
        violations.append(
            f"cost derivative at 0 is nonzero (one-sided: {fwd:g}, {bwd:g})"
        )
    return AssumptionReport(tuple(violations))
