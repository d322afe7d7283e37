"""Executable acceptance checks for the whole suite.

Each criterion is a function returning a CriterionResult; ``run_all``
executes them in order. The CLI ``verify`` subcommand prints one
pass/fail line per criterion and the pytest acceptance module asserts
them individually. Criteria marked ``expected_failure`` are implemented
exactly as stated but are known to be unattainable (each records why in
its docstring); they still count as failures for the verify exit code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Ranking, Rng, split_dataset
from .estimators import effect_matrix, logistic_loss_grad, mlp_loss_grad
from .harness import ExperimentConfig, rng_for, run_detector
from .metrics import ausc, dcg_at_k, expected_random_ausc, spearman
from .ranking import perturbation_stability, rank_from_effects
from .strategic import (
    CostSpec,
    RewardSpec,
    Verdict,
    epsilon_gaming_verdict,
    lambda_lower_bound,
    optimal_response,
)
from .synthgen import TrueResponseModel, generate_dataset

__all__ = ["CriterionResult", "run_all"] + [f"criterion_a{i}" for i in range(1, 12)]


@dataclass(frozen=True)
class CriterionResult:
    name: str
    passed: bool
    detail: str
    expected_failure: bool = False


def _cell_auscs(
    config: ExperimentConfig, mean_range: float, detectors: tuple[str, ...]
) -> dict[str, float]:
    """Mean AUSC per detector over the config's seeds at one grid cell."""
    synth = config.synth.with_mean_range(mean_range)
    totals = {d: 0.0 for d in detectors}
    for seed in config.seeds:
        labeled = generate_dataset(synth, rng_for(seed, "generate", mean_range))
        train, test = split_dataset(
            labeled.dataset, config.train_frac, rng_for(seed, "split", mean_range)
        )
        for det in detectors:
            ranking, _ = run_detector(det, train, test, config, seed, mean_range)
            totals[det] += ausc(ranking, labeled.truth_order, config.top_m)
    return {d: t / len(config.seeds) for d, t in totals.items()}


def criterion_a1() -> CriterionResult:
    """Oracle effect matrices recover the true order at every grid cell."""
    config = ExperimentConfig()
    failures = []
    for mr in config.mean_range_grid:
        synth = config.synth.with_mean_range(mr)
        for seed in config.seeds:
            labeled = generate_dataset(synth, rng_for(seed, "generate", mr))
            oracle = TrueResponseModel.for_dataset(synth, labeled)
            T = effect_matrix(oracle, labeled.dataset)
            if rank_from_effects(T).order != labeled.truth_order.order:
                failures.append((mr, seed))
    return CriterionResult(
        "A1 oracle ranking exactness",
        not failures,
        f"{len(config.mean_range_grid) * len(config.seeds)} cells, "
        + ("all exact" if not failures else f"mismatches at {failures[:5]}"),
    )


def criterion_a2() -> CriterionResult:
    """Best responses decrease in lambda and never fall below d_star."""
    g = Rng(2).substream("acceptance-a2").generator()
    pairs = [
        (RewardSpec.affine(), CostSpec.quadratic()),
        (RewardSpec.log(), CostSpec.quadratic()),
    ]
    n = 1000
    violations = []
    for reward, cost in pairs:
        lams = np.exp(g.uniform(np.log(1e-3), np.log(1e3), size=n))
        d_stars = g.uniform(0.0, 0.9, size=n)
        factors = g.uniform(1.5, 10.0, size=n)
        for lam, ds, f in zip(lams, d_stars, factors):
            lo = optimal_response(reward, cost, lam, ds)
            hi = optimal_response(reward, cost, lam * f, ds)
            if lo < ds - 1e-12 or hi < ds - 1e-12:
                violations.append("below d_star")
            if lo < 1.0 - 1e-9 and not lo > hi:  # interior: strict decrease
                violations.append(f"not decreasing at lam={lam:.3g}")
    return CriterionResult(
        "A2 best-response monotonicity",
        not violations,
        f"{2 * n} draws checked" + ("" if not violations else f"; {violations[:3]}"),
    )


def criterion_a3() -> CriterionResult:
    """Lower bound validity, sharpness at d_star=0, and the worked example."""
    g = Rng(3).substream("acceptance-a3").generator()
    problems = []
    for reward, cost in (
        (RewardSpec.affine(), CostSpec.quadratic()),
        (RewardSpec.log(), CostSpec.quadratic()),
    ):
        # The bound is derived from the first-order condition, so draws
        # are restricted to interior responses (clamping at 1.0 under a
        # tiny lambda voids the premise).
        checked = 0
        while checked < 1000:
            lam = float(np.exp(g.uniform(np.log(1e-3), np.log(1e3))))
            ds = float(g.uniform(0.0, 0.9))
            delta = optimal_response(reward, cost, lam, ds)
            if delta >= 1.0 - 1e-9:
                continue
            bound = lambda_lower_bound(reward, cost, delta)
            if bound > lam + 1e-9:
                problems.append(f"bound {bound:.6g} > lam {lam:.6g}")
            checked += 1
        # sharpness probes at d_star = 0, interior regime
        for lam in np.exp(g.uniform(np.log(0.7), np.log(1e3), size=200)):
            delta = optimal_response(reward, cost, lam, 0.0)
            if delta < 1.0 - 1e-9:
                bound = lambda_lower_bound(reward, cost, delta)
                if abs(bound - lam) > 1e-6:
                    problems.append(f"sharpness off by {abs(bound - lam):.2e}")

    reward, cost = RewardSpec.affine(), CostSpec.quadratic()
    d1 = optimal_response(reward, cost, 10.0, 0.05)
    d2 = optimal_response(reward, cost, 30.0, 0.12)
    b1 = lambda_lower_bound(reward, cost, d1)
    b2 = lambda_lower_bound(reward, cost, d2)
    if abs(d1 - 0.10) > 1e-9:
        problems.append(f"worked example delta_1={d1}")
    if abs(d2 - 0.1367) > 5e-4:
        problems.append(f"worked example delta_2={d2}")
    if abs(b1 - 5.0) > 0.01 or abs(b2 - 3.66) > 0.01:
        problems.append(f"worked example bounds {b1:.4f}, {b2:.4f}")
    return CriterionResult(
        "A3 partial-identification bound",
        not problems,
        f"worked example: deltas ({d1:.4f}, {d2:.4f}), bounds ({b1:.3f}, {b2:.3f})"
        + ("" if not problems else f"; {problems[:3]}"),
    )


def criterion_a4() -> CriterionResult:
    """Empirical mean AUSC of uniform random rankings vs 0.475 +/- 0.01.

    Known-unattainable as stated: with the suite's AUSC (mean of the
    sensitivity curve over audit counts 1..K) the true expectation is
    (K+1)/(2K) = 0.525 for K=20. The 0.475 target equals (K-1)/(2K),
    which is the mean over audit counts 0..K-1; the two conventions
    differ by exactly 1/K. The pinned hand values (perfect = 0.9,
    worst = 0.15) force the 1..K convention, so this target cannot be
    met simultaneously.
    """
    truth = Ranking(tuple(range(20)))
    g = Rng(4).substream("acceptance-a4").generator()
    vals = [
        ausc(Ranking(tuple(int(v) for v in g.permutation(20))), truth)
        for _ in range(10_000)
    ]
    mean = float(np.mean(vals))
    return CriterionResult(
        "A4 expected random AUSC",
        abs(mean - 0.475) <= 0.01,
        f"empirical mean {mean:.4f} vs target 0.475+/-0.01 "
        f"(convention-consistent expectation {21 / 40:.4f})",
        expected_failure=True,
    )


def criterion_a5() -> CriterionResult:
    """Confounding at mean_range 1.0 pushes payout-only below 0.42."""
    config = ExperimentConfig()
    means = _cell_auscs(config, 1.0, ("payout", "random"))
    return CriterionResult(
        "A5 confounding breaks payout ranking",
        means["payout"] < 0.42,
        f"payout={means['payout']:.3f} (threshold 0.42), random={means['random']:.3f}",
    )


def criterion_a6() -> CriterionResult:
    """S+IPW beats payout-only by at least 0.2 AUSC at mean_range 1.0."""
    config = ExperimentConfig()
    means = _cell_auscs(config, 1.0, ("payout", "s_ipw"))
    gap = means["s_ipw"] - means["payout"]
    return CriterionResult(
        "A6 causal advantage under confounding",
        gap >= 0.2,
        f"s_ipw={means['s_ipw']:.3f} payout={means['payout']:.3f} gap={gap:.3f}",
    )


def criterion_a7() -> CriterionResult:
    """S-learner stays well above random without confounding."""
    config = ExperimentConfig()
    means = _cell_auscs(config, 0.0, ("payout", "s_learner"))
    floor = expected_random_ausc(config.synth.n_agents) + 0.05
    return CriterionResult(
        "A7 no-confounding parity",
        means["s_learner"] > floor,
        f"s_learner={means['s_learner']:.3f} floor={floor:.3f}; "
        f"payout gap {means['s_learner'] - means['payout']:+.3f} (informative)",
    )


def criterion_a8() -> CriterionResult:
    """Bounded noise below half the minimum effect never flips the order."""
    config = ExperimentConfig()
    synth = config.synth.with_mean_range(1.0)
    seed = config.seeds[0]
    labeled = generate_dataset(synth, rng_for(seed, "generate", 1.0))
    oracle = TrueResponseModel.for_dataset(synth, labeled)
    T = effect_matrix(oracle, labeled.dataset)
    off = np.abs(T.tau[~np.eye(T.n_agents, dtype=bool)])
    eps = float(off.min()) / 2.0
    report = perturbation_stability(T, eps, 1000, Rng(8).substream("acceptance-a8"))
    return CriterionResult(
        "A8 perturbation stability",
        report.stable_fraction == 1.0,
        f"eps={eps:.3g}, stable fraction {report.stable_fraction:.3f}",
    )


def criterion_a9() -> CriterionResult:
    """Hand-computed metric values, exact to 1e-3."""
    truth = Ranking(tuple(range(20)))
    perfect = truth
    worst = Ranking(tuple(range(5, 20)) + tuple(range(5)))
    checks = {
        "dcg": (dcg_at_k(perfect, truth, 3), 38.857),
        "perfect_ausc": (ausc(perfect, truth), 0.9),
        "worst_ausc": (ausc(worst, truth), 0.15),
        "spearman": (spearman([1, 2, 3, 4], [1, 2, 4, 3]), 0.8),
    }
    bad = {k: v for k, (v, want) in checks.items() if abs(v - want) > 1e-3}
    return CriterionResult(
        "A9 metric hand values",
        not bad,
        ", ".join(f"{k}={v:.4f}" for k, (v, _) in checks.items()),
    )


def criterion_a10() -> CriterionResult:
    """Analytic gradients match central finite differences."""
    g = Rng(10).substream("acceptance-a10").generator()
    worst = 0.0
    for trial in range(50):
        n, d = 12, 3
        X = g.standard_normal((n, d))
        y = (g.uniform(size=n) < 0.5).astype(float)
        nw = g.uniform(0.5, 1.5, size=n)
        nw = nw / nw.sum()
        l2 = 1e-3

        w = g.standard_normal(d) * 0.5
        b = float(g.standard_normal())
        _, gw, gb = logistic_loss_grad(w, b, X, y, nw, l2)
        num = np.empty(d + 1)
        h = 1e-6
        for j in range(d):
            wp, wm = w.copy(), w.copy()
            wp[j] += h
            wm[j] -= h
            num[j] = (
                logistic_loss_grad(wp, b, X, y, nw, l2)[0]
                - logistic_loss_grad(wm, b, X, y, nw, l2)[0]
            ) / (2 * h)
        num[d] = (
            logistic_loss_grad(w, b + h, X, y, nw, l2)[0]
            - logistic_loss_grad(w, b - h, X, y, nw, l2)[0]
        ) / (2 * h)
        ana = np.append(gw, gb)
        worst = max(worst, _rel_err(ana, num))

        layers = [
            (g.standard_normal((d, 4)) * 0.5, g.standard_normal(4) * 0.1),
            (g.standard_normal((4, 4)) * 0.5, g.standard_normal(4) * 0.1),
            (g.standard_normal((4, 1)) * 0.5, g.standard_normal(1) * 0.1),
        ]
        _, grads = mlp_loss_grad(layers, X, y, nw, l2)
        ana_flat, num_flat = [], []
        for li, (W, b_arr) in enumerate(layers):
            for arr_idx, arr in ((0, W), (1, b_arr)):
                it = np.nditer(arr, flags=["multi_index"])
                for _ in it:
                    pos = it.multi_index
                    plus = [(w_.copy(), b_.copy()) for w_, b_ in layers]
                    minus = [(w_.copy(), b_.copy()) for w_, b_ in layers]
                    plus[li][arr_idx][pos] += h
                    minus[li][arr_idx][pos] -= h
                    num_flat.append(
                        (mlp_loss_grad(plus, X, y, nw, l2)[0]
                         - mlp_loss_grad(minus, X, y, nw, l2)[0]) / (2 * h)
                    )
                    ana_flat.append(grads[li][arr_idx][pos])
        worst = max(worst, _rel_err(np.array(ana_flat), np.array(num_flat)))
    return CriterionResult(
        "A10 gradient checks",
        worst <= 1e-4,
        f"worst relative error {worst:.2e} over 50 instances",
    )


def _rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(a)), float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(a - b)) / denom


def criterion_a11() -> CriterionResult:
    """The two derived epsilon-gaming interval examples."""
    reward, cost = RewardSpec.affine(), CostSpec.quadratic()
    gaming = epsilon_gaming_verdict(reward, cost, 0.02, 0.10, (0.02, 0.06))
    clean = epsilon_gaming_verdict(reward, cost, 0.02, 0.10, (0.085, 0.095))
    ok = gaming.verdict is Verdict.GAMING and clean.verdict is Verdict.NOT_GAMING
    return CriterionResult(
        "A11 epsilon-gaming verdicts",
        ok,
        f"[0.02,0.06] -> {gaming.verdict.value}, [0.085,0.095] -> {clean.verdict.value}",
    )


_CRITERIA = [
    criterion_a1,
    criterion_a2,
    criterion_a3,
    criterion_a4,
    criterion_a5,
    criterion_a6,
    criterion_a7,
    criterion_a8,
    criterion_a9,
    criterion_a10,
    criterion_a11,
]


def run_all(verbose: bool = True) -> list[CriterionResult]:
    results = []
    for fn in _CRITERIA:
        res = fn()
        results.append(res)
        if verbose:
            status = "PASS" if res.passed else "FAIL"
            note = " (documented spec defect)" if res.expected_failure and not res.passed else ""
            print(f"[{status}] {res.name}: {res.detail}{note}")
    return results
