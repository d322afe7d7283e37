"""Causal effect estimators over agents-as-treatments.

All model fitting is from-scratch numpy: full-batch gradient descent on
(optionally sample-weighted) cross-entropy with an l2 penalty, which
keeps every fit deterministic given its inputs. The estimators expose a
common ``predict(x, agent_id)`` surface so pairwise average treatment
effects between agents can be assembled into an antisymmetric effect
matrix and handed to the ranking stage.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Dataset, format_float

__all__ = [
    "FitHyper",
    "LinearLogisticModel",
    "MlpModel",
    "PropensityModel",
    "SLearnerModel",
    "TLearnerModel",
    "SIpwFit",
    "EffectMatrix",
    "PsmDiagnostics",
    "fit_logistic",
    "fit_mlp",
    "fit_propensity",
    "fit_s_learner",
    "fit_t_learner",
    "fit_s_ipw",
    "pairwise_ate",
    "effect_matrix",
    "psm_ate",
    "logistic_loss_grad",
    "mlp_loss_grad",
]

PROP_CLIP = 1e-6


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _logit(q: float) -> float:
    q = min(max(q, 1e-9), 1.0 - 1e-9)
    return float(np.log(q / (1.0 - q)))


@dataclass(frozen=True)
class FitHyper:
    """Gradient-descent settings shared by all model families.

    The step size must stay below 2 / L for the cross-entropy curvature
    L of the task; 0.5 is safe for covariates on the unit scale this
    suite works at.
    """

    lr: float = 0.5
    epochs: int = 500
    l2: float = 1e-3
    tol: float = 1e-7
    mlp_width: int = 32
    init_seed: int = 0


def _norm_weights(n: int, sample_weights: np.ndarray | None) -> np.ndarray:
    if sample_weights is None:
        return np.full(n, 1.0 / n)
    sw = np.asarray(sample_weights, dtype=float)
    if sw.shape != (n,):
        raise ValueError("sample_weights length must match the feature rows")
    if np.any(sw <= 0):
        raise ValueError("sample_weights must be positive")
    return sw / sw.sum()


# ---------------------------------------------------------------------------
# Linear logistic regression
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearLogisticModel:
    weights: np.ndarray
    bias: float
    feature_map: str = "raw"

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        return sigmoid(np.asarray(features, float) @ self.weights + self.bias)


def logistic_loss_grad(
    w: np.ndarray,
    b: float,
    features: np.ndarray,
    labels: np.ndarray,
    norm_w: np.ndarray,
    l2: float,
) -> tuple[float, np.ndarray, float]:
    """Weighted NLL (weights normalized to sum 1) + l2/2 * |w|^2."""
    z = features @ w + b
    loss = float(np.sum(norm_w * (_softplus(z) - labels * z))) + 0.5 * l2 * float(w @ w)
    resid = norm_w * (sigmoid(z) - labels)
    grad_w = features.T @ resid + l2 * w
    grad_b = float(np.sum(resid))
    return loss, grad_w, grad_b


def fit_logistic(
    features: np.ndarray,
    labels: np.ndarray,
    sample_weights: np.ndarray | None = None,
    hyper: FitHyper = FitHyper(),
    feature_map: str = "raw",
) -> LinearLogisticModel:
    """Maximum-likelihood logistic fit by full-batch gradient descent.

    Normalizing the sample weights to sum 1 makes the fit invariant to
    rescaling all weights by a common factor (the l2 term is untouched).
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("features must be (n, d) and labels (n,)")
    nw = _norm_weights(X.shape[0], sample_weights)
    base_rate = float(np.sum(nw * y))
    if base_rate in (0.0, 1.0):
        warnings.warn(
            "all labels identical; fit degenerates to an intercept-only model",
            stacklevel=2,
        )
    w = np.zeros(X.shape[1])
    b = _logit(base_rate)
    prev = np.inf
    for _ in range(hyper.epochs):
        loss, gw, gb = logistic_loss_grad(w, b, X, y, nw, hyper.l2)
        if abs(prev - loss) < hyper.tol * max(1.0, abs(prev)):
            break
        prev = loss
        w -= hyper.lr * gw
        b -= hyper.lr * gb
    return LinearLogisticModel(weights=w, bias=b, feature_map=feature_map)


# ---------------------------------------------------------------------------
# Small MLP (two hidden rectifier layers, sigmoid output)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MlpModel:
    layers: tuple[tuple[np.ndarray, np.ndarray], ...]  # ((W, b), ...)
    feature_map: str = "raw"

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        h = np.asarray(features, dtype=float)
        for W, b in self.layers[:-1]:
            h = np.maximum(h @ W + b, 0.0)
        W, b = self.layers[-1]
        return sigmoid((h @ W + b)[:, 0])


def _mlp_init(dim: int, width: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    sizes = [dim, width, width, 1]
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        W = g.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)
        layers.append((W, np.zeros(fan_out)))
    return layers


def mlp_loss_grad(
    layers: Sequence[tuple[np.ndarray, np.ndarray]],
    features: np.ndarray,
    labels: np.ndarray,
    norm_w: np.ndarray,
    l2: float,
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Weighted NLL + l2/2 * sum |W|^2 and its backprop gradients."""
    acts = [np.asarray(features, dtype=float)]
    for W, b in layers[:-1]:
        acts.append(np.maximum(acts[-1] @ W + b, 0.0))
    W_out, b_out = layers[-1]
    z = (acts[-1] @ W_out + b_out)[:, 0]
    loss = float(np.sum(norm_w * (_softplus(z) - labels * z)))
    loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W, _ in layers)

    delta = (norm_w * (sigmoid(z) - labels))[:, None]
    grads: list[tuple[np.ndarray, np.ndarray]] = []
    for i in range(len(layers) - 1, -1, -1):
        W, _ = layers[i]
        gW = acts[i].T @ delta + l2 * W
        gb = delta.sum(axis=0)
        grads.append((gW, gb))
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    grads.reverse()
    return loss, grads


def fit_mlp(
    features: np.ndarray,
    labels: np.ndarray,
    sample_weights: np.ndarray | None = None,
    hyper: FitHyper = FitHyper(),
    feature_map: str = "raw",
) -> MlpModel:
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    nw = _norm_weights(X.shape[0], sample_weights)
    layers = _mlp_init(X.shape[1], hyper.mlp_width, hyper.init_seed)
    prev = np.inf
    for _ in range(hyper.epochs):
        loss, grads = mlp_loss_grad(layers, X, y, nw, hyper.l2)
        if abs(prev - loss) < hyper.tol * max(1.0, abs(prev)):
            break
        prev = loss
        layers = [
            (W - hyper.lr * gW, b - hyper.lr * gb)
            for (W, b), (gW, gb) in zip(layers, grads)
        ]
    return MlpModel(layers=tuple((W.copy(), b.copy()) for W, b in layers),
                    feature_map=feature_map)


# ---------------------------------------------------------------------------
# Propensity model (multinomial logistic over agents)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PropensityModel:
    """Softmax regression P(agent | x); rows sum to 1, all entries > 0."""

    weights: np.ndarray  # (d, P)
    bias: np.ndarray  # (P,)
    agent_ids: tuple[int, ...]

    def predict_proba(self, x: np.ndarray, clip: float | None = None) -> np.ndarray:
        z = np.asarray(x, float) @ self.weights + self.bias
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        if clip is not None:
            probs = np.clip(probs, clip, 1.0 - clip)
        return probs

    def column_of(self, agent_id: int) -> int:
        try:
            return self.agent_ids.index(agent_id)
        except ValueError:
            raise ValueError(f"unknown agent id {agent_id}") from None


def fit_propensity(train: Dataset, hyper: FitHyper = FitHyper()) -> PropensityModel:
    """Fit P(agent | x) by gradient descent on the softmax cross-entropy."""
    ids = tuple(int(i) for i in np.unique(train.p))
    P = len(ids)
    if P < 2:
        raise ValueError("propensity model needs at least 2 agents")
    X = train.x
    n, d = X.shape
    Y = np.zeros((n, P))
    for j, agent in enumerate(ids):
        Y[train.p == agent, j] = 1.0
    freqs = Y.mean(axis=0)
    W = np.zeros((d, P))
    b = np.log(np.maximum(freqs, 1e-12))
    prev = np.inf
    for _ in range(hyper.epochs):
        z = X @ W + b
        z -= z.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs = e / e.sum(axis=1, keepdims=True)
        loss = float(-np.sum(Y * np.log(np.maximum(probs, 1e-300))) / n)
        loss += 0.5 * hyper.l2 * float(np.sum(W * W))
        if abs(prev - loss) < hyper.tol * max(1.0, abs(prev)):
            break
        prev = loss
        resid = (probs - Y) / n
        W -= hyper.lr * (X.T @ resid + hyper.l2 * W)
        b -= hyper.lr * resid.sum(axis=0)
    return PropensityModel(weights=W, bias=b, agent_ids=ids)


# ---------------------------------------------------------------------------
# Outcome meta-learners
# ---------------------------------------------------------------------------

def _onehot_features(x: np.ndarray, agent_col: np.ndarray, ids: Sequence[int]) -> np.ndarray:
    enc = np.zeros((x.shape[0], len(ids)))
    for j, agent in enumerate(ids):
        enc[agent_col == agent, j] = 1.0
    return np.hstack([x, enc])


@dataclass(frozen=True)
class SLearnerModel:
    """One outcome model over [x, one-hot agent] for all agents."""

    base: LinearLogisticModel | MlpModel
    agent_ids: tuple[int, ...]

    def predict(self, x: np.ndarray, agent_id: int) -> np.ndarray:
        if agent_id not in self.agent_ids:
            raise ValueError(f"unknown agent id {agent_id}")
        x = np.atleast_2d(np.asarray(x, float))
        col = np.full(x.shape[0], agent_id)
        return self.base.predict_proba(_onehot_features(x, col, self.agent_ids))


@dataclass(frozen=True)
class TLearnerModel:
    """One outcome model of x per agent, plus overlap diagnostics."""

    models: dict[int, LinearLogisticModel | MlpModel]
    boxes: dict[int, tuple[np.ndarray, np.ndarray]]  # per-agent (min, max) over train x

    @property
    def agent_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.models))

    def predict(self, x: np.ndarray, agent_id: int) -> np.ndarray:
        if agent_id not in self.models:
            raise ValueError(f"unknown agent id {agent_id}")
        return self.models[agent_id].predict_proba(np.atleast_2d(np.asarray(x, float)))

    def extrapolation_fraction(self, x: np.ndarray, agent_id: int) -> float:
        """Share of rows outside the agent's training bounding box."""
        lo, hi = self.boxes[agent_id]
        x = np.atleast_2d(np.asarray(x, float))
        outside = np.any((x < lo) | (x > hi), axis=1)
        return float(outside.mean())

    def overlap_report(self, x: np.ndarray, threshold: float = 0.05) -> dict[int, float]:
        """Agents whose counterfactuals extrapolate beyond training support."""
        report = {}
        for agent in self.agent_ids:
            frac = self.extrapolation_fraction(x, agent)
            if frac > threshold:
                report[agent] = frac
        return report


def _fit_base(
    features: np.ndarray,
    labels: np.ndarray,
    model_kind: str,
    hyper: FitHyper,
    sample_weights: np.ndarray | None = None,
    feature_map: str = "raw",
):
    if model_kind == "linear":
        return fit_logistic(features, labels, sample_weights, hyper, feature_map)
    if model_kind == "mlp":
        return fit_mlp(features, labels, sample_weights, hyper, feature_map)
    raise ValueError(f"unknown model kind {model_kind!r}")


def fit_s_learner(
    train: Dataset,
    model_kind: str = "linear",
    hyper: FitHyper = FitHyper(),
    sample_weights: np.ndarray | None = None,
) -> SLearnerModel:
    """One shared model of P(d=1 | x, agent) over agent-indicator features."""
    if train.n_records == 0:
        raise ValueError("empty training dataset")
    ids = tuple(int(i) for i in np.unique(train.p))
    feats = _onehot_features(train.x, train.p, ids)
    base = _fit_base(feats, train.d, model_kind, hyper, sample_weights,
                     feature_map="covariates+agent_onehot")
    return SLearnerModel(base=base, agent_ids=ids)


def fit_t_learner(
    train: Dataset,
    model_kind: str = "linear",
    hyper: FitHyper = FitHyper(),
) -> TLearnerModel:
    """Independent P(d=1 | x) models, one per agent."""
    models: dict[int, LinearLogisticModel | MlpModel] = {}
    boxes: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for agent in (int(a.id) for a in train.agents):
        rows = train.rows_of(agent)
        if rows.size == 0:
            raise ValueError(f"agent {agent} has no training rows")
        if rows.size < 50:
            warnings.warn(
                f"agent {agent} has only {rows.size} training rows", stacklevel=2
            )
        x = train.x[rows]
        models[agent] = _fit_base(x, train.d[rows], model_kind, hyper)
        boxes[agent] = (x.min(axis=0), x.max(axis=0))
    return TLearnerModel(models=models, boxes=boxes)


@dataclass(frozen=True)
class SIpwFit:
    """S-learner trained with stabilized inverse-propensity weights."""

    model: SLearnerModel
    weights: np.ndarray
    propensity: PropensityModel
    stabilized: bool
    prop_clip: float
    # Counterfactual means at prediction time are unweighted by default;
    # flip this flag to average with the training-style weights instead.
    weighted_prediction: bool = False


def fit_s_ipw(
    train: Dataset,
    model_kind: str = "linear",
    hyper: FitHyper = FitHyper(),
    stabilized: bool = True,
    prop_clip: float = PROP_CLIP,
    weighted_prediction: bool = False,
) -> SIpwFit:
    """Propensity-weighted S-learner.

    Row weights are 1/propensity of the observed agent, stabilized by
    the uniform marginal 1/P so a perfectly unconfounded dataset gets
    weights near 1.
    """
    propensity = fit_propensity(train, hyper)
    probs = propensity.predict_proba(train.x, clip=prop_clip)
    cols = np.array([propensity.column_of(int(a)) for a in train.p])
    ps = probs[np.arange(train.n_records), cols]
    weights = 1.0 / ps
    if stabilized:
        weights /= len(propensity.agent_ids)
    model = fit_s_learner(train, model_kind, hyper, sample_weights=weights)
    return SIpwFit(
        model=model,
        weights=weights,
        propensity=propensity,
        stabilized=stabilized,
        prop_clip=prop_clip,
        weighted_prediction=weighted_prediction,
    )


# ---------------------------------------------------------------------------
# Pairwise effects
# ---------------------------------------------------------------------------

def pairwise_ate(
    model,
    test: Dataset,
    p: int,
    p2: int,
    weights: np.ndarray | None = None,
) -> float:
    """Mean predicted decision-rate difference between two agents.

    Both counterfactuals are imputed over all test covariates (every
    agent's population pooled), so each direction of comparison sees
    the same rows and the resulting matrix is exactly antisymmetric.
    ``weights`` (aligned with test rows) enables the weighted-average
    variant.
    """
    if test.n_records == 0:
        raise ValueError("empty test dataset")
    if p == p2:
        return 0.0
    diff = np.asarray(model.predict(test.x, p)) - np.asarray(model.predict(test.x, p2))
    if weights is None:
        return float(diff.mean())
    w = np.asarray(weights, float)
    return float(np.sum(w * diff) / np.sum(w))


@dataclass(frozen=True)
class EffectMatrix:
    """Antisymmetric P-by-P matrix of pairwise effect estimates."""

    tau: np.ndarray
    agent_ids: tuple[int, ...]

    def __post_init__(self) -> None:
        tau = np.asarray(self.tau, dtype=float)
        if tau.ndim != 2 or tau.shape[0] != tau.shape[1]:
            raise ValueError("effect matrix must be square")
        if tau.shape[0] != len(self.agent_ids):
            raise ValueError("agent id count must match the matrix size")
        # Antisymmetrize on construction; the diagonal is identically 0.
        tau = 0.5 * (tau - tau.T)
        np.fill_diagonal(tau, 0.0)
        tau.setflags(write=False)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "agent_ids", tuple(int(i) for i in self.agent_ids))

    @property
    def n_agents(self) -> int:
        return len(self.agent_ids)

    def write_csv(self, path) -> None:
        header = "agent_id," + ",".join(str(i) for i in self.agent_ids)
        lines = [header]
        for i, agent in enumerate(self.agent_ids):
            lines.append(
                str(agent) + "," + ",".join(format_float(v) for v in self.tau[i])
            )
        with open(path, "w", encoding="utf-8") as f:
            f.write("\n".join(lines) + "\n")

    @staticmethod
    def read_csv(path) -> "EffectMatrix":
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            ids = tuple(int(i) for i in header[1:])
            rows = [line.strip().split(",") for line in f if line.strip()]
        tau = np.array([[float(v) for v in row[1:]] for row in rows])
        return EffectMatrix(tau=tau, agent_ids=ids)


def effect_matrix(
    model,
    test: Dataset,
    weights: np.ndarray | None = None,
) -> EffectMatrix:
    """All-pairs effect matrix from one fitted outcome model."""
    ids = tuple(int(a.id) for a in test.agents)
    if weights is None:
        means = {a: float(np.mean(model.predict(test.x, a))) for a in ids}
    else:
        w = np.asarray(weights, float)
        w = w / w.sum()
        means = {a: float(np.sum(w * model.predict(test.x, a))) for a in ids}
    P = len(ids)
    tau = np.zeros((P, P))
    for i, a in enumerate(ids):
        for j in range(i + 1, P):
            val = means[a] - means[ids[j]]
            tau[i, j] = val
            tau[j, i] = -val
    return EffectMatrix(tau=tau, agent_ids=ids)


# ---------------------------------------------------------------------------
# Propensity score matching
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsmDiagnostics:
    n_matched: int
    n_dropped_p: int
    n_dropped_p2: int
    mean_score_distance: float
    greedy_cost: float
    optimal_cost: float

    @property
    def objective_gap(self) -> float:
        return self.greedy_cost - self.optimal_cost


def _optimal_match_cost(a: np.ndarray, b: np.ndarray) -> float:
    """Exact minimum-cost one-to-one matching of a into b for |.| costs.

    Optimal matchings of sorted 1-D values never cross, so a simple
    O(len(a)*len(b)) recurrence suffices.
    """
    a = np.sort(a)
    b = np.sort(b)
    if a.size > b.size:
        a, b = b, a
    m, n = a.size, b.size
    prev = np.zeros(n + 1)  # matching zero items costs nothing
    for i in range(1, m + 1):
        cur = np.full(n + 1, np.inf)
        # cur[j] = min(cur[j-1], prev[j-1] + |a_i - b_j|) for j >= i,
        # which is a running minimum over the candidate column.
        cand = prev[i - 1 : n] + np.abs(a[i - 1] - b[i - 1 : n])
        cur[i:] = np.minimum.accumulate(cand)
        prev = cur
    return float(prev[n])


def psm_ate(
    propensity: PropensityModel,
    test: Dataset,
    p: int,
    p2: int,
) -> tuple[float, PsmDiagnostics]:
    """One-to-one greedy matching on propensity scores, without replacement.

    Rows of both agents are scored by the propensity of agent ``p``
    given x; candidate pairs are processed in ascending score distance,
    matching whenever both rows are still free. Unmatched rows are
    dropped from the effect estimate.
    """
    rows_p = test.rows_of(p)
    rows_q = test.rows_of(p2)
    if rows_p.size == 0 or rows_q.size == 0:
        raise ValueError(f"no possible matches between agents {p} and {p2}")
    col = propensity.column_of(p)
    sp = propensity.predict_proba(test.x[rows_p])[:, col]
    sq = propensity.predict_proba(test.x[rows_q])[:, col]

    dist = np.abs(sp[:, None] - sq[None, :])
    order = np.argsort(dist, axis=None, kind="stable")
    n_p, n_q = rows_p.size, rows_q.size
    target = min(n_p, n_q)
    used_p = np.zeros(n_p, dtype=bool)
    used_q = np.zeros(n_q, dtype=bool)
    matched_p: list[int] = []
    matched_q: list[int] = []
    total = 0.0
    for flat in order:
        i, j = divmod(int(flat), n_q)
        if used_p[i] or used_q[j]:
            continue
        used_p[i] = used_q[j] = True
        matched_p.append(i)
        matched_q.append(j)
        total += float(dist[i, j])
        if len(matched_p) == target:
            break

    ate = float(
        test.d[rows_p[matched_p]].mean() - test.d[rows_q[matched_q]].mean()
    )
    diag = PsmDiagnostics(
        n_matched=target,
        n_dropped_p=n_p - target,
        n_dropped_p2=n_q - target,
        mean_score_distance=total / target,
        greedy_cost=total,
        optimal_cost=_optimal_match_cost(sp, sq),
    )
    return ate, diag


def psm_effect_matrix(
    propensity: PropensityModel, test: Dataset
) -> EffectMatrix:
    """All-pairs matched effect estimates (antisymmetrized)."""
    ids = tuple(int(a.id) for a in test.agents)
    P = len(ids)
    tau = np.zeros((P, P))
    for i in range(P):
        for j in range(i + 1, P):
            ate, _ = psm_ate(propensity, test, ids[i], ids[j])
            tau[i, j] = ate
            tau[j, i] = -ate
    return EffectMatrix(tau=tau, agent_ids=ids)
