"""Shared domain types, seeded randomness, and dataset plumbing.

Every other module builds on the types here: agents with a gaming
deterrence parameter, observation datasets of (covariates, decision,
agent) rows, rankings over agents, and a splittable deterministic RNG.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "AgentSpec",
    "ObservationRecord",
    "Dataset",
    "Ranking",
    "Rng",
    "split_dataset",
    "write_dataset_csv",
    "read_dataset_csv",
    "format_float",
]

# Floats in all CSV interchange files carry 9 significant digits.
FLOAT_FMT = "%.9g"


def format_float(x: float) -> str:
    return FLOAT_FMT % float(x)


@dataclass(frozen=True)
class AgentSpec:
    """One agent: dense integer id plus its gaming deterrence parameter.

    ``lam`` is the per-agent cost multiplier; lower values mean more
    willingness to game. It is None for datasets where the parameter is
    unknown (e.g. loaded from a bare CSV).
    """

    id: int
    lam: float | None = None

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"agent id must be non-negative, got {self.id}")
        if self.lam is not None and not self.lam > 0:
            raise ValueError(f"agent lambda must be > 0, got {self.lam}")


@dataclass(frozen=True)
class ObservationRecord:
    """A single (x, d, p) row, with hidden ground truth when synthetic."""

    x: np.ndarray
    d: int
    p: int
    d_star: int | None = None
    alpha_star: float | None = None
    alpha_gamed: float | None = None


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable observational dataset over a fixed set of agents.

    Arrays are row-aligned: ``x[i]`` are the covariates seen by agent
    ``p[i]`` when it made binary decision ``d[i]``. The three hidden
    arrays are populated only for synthetic data.
    """

    x: np.ndarray  # (n, covariate_dim) float
    d: np.ndarray  # (n,) int in {0, 1}
    p: np.ndarray  # (n,) int agent ids
    agents: tuple[AgentSpec, ...]
    d_star: np.ndarray | None = None
    alpha_star: np.ndarray | None = None
    alpha_gamed: np.ndarray | None = None

    def __post_init__(self) -> None:
        x = _readonly(np.asarray(self.x, dtype=float))
        d = _readonly(np.asarray(self.d, dtype=np.int64))
        p = _readonly(np.asarray(self.p, dtype=np.int64))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "agents", tuple(self.agents))
        if x.ndim != 2:
            raise ValueError("covariates must be a 2-D array")
        n = x.shape[0]
        if d.shape != (n,) or p.shape != (n,):
            raise ValueError("x, d, p must have matching lengths")
        if n and not np.isin(d, (0, 1)).all():
            raise ValueError("decisions must be binary")
        ids = {a.id for a in self.agents}
        if len(ids) != len(self.agents):
            raise ValueError("duplicate agent ids")
        if n and not np.isin(p, sorted(ids)).all():
            raise ValueError("record references an agent not in the agent list")
        for name in ("d_star", "alpha_star", "alpha_gamed"):
            arr = getattr(self, name)
            if arr is not None:
                arr = _readonly(np.asarray(arr, dtype=float))
                if arr.shape != (n,):
                    raise ValueError(f"{name} must have length {n}")
                object.__setattr__(self, name, arr)

    @property
    def n_records(self) -> int:
        return self.x.shape[0]

    def __len__(self) -> int:
        return self.n_records

    @property
    def covariate_dim(self) -> int:
        return self.x.shape[1]

    @property
    def agent_ids(self) -> np.ndarray:
        return np.array(sorted(a.id for a in self.agents))

    def record(self, i: int) -> ObservationRecord:
        return ObservationRecord(
            x=self.x[i],
            d=int(self.d[i]),
            p=int(self.p[i]),
            d_star=None if self.d_star is None else int(self.d_star[i]),
            alpha_star=None if self.alpha_star is None else float(self.alpha_star[i]),
            alpha_gamed=None if self.alpha_gamed is None else float(self.alpha_gamed[i]),
        )

    def records(self) -> Iterable[ObservationRecord]:
        return (self.record(i) for i in range(self.n_records))

    def rows_of(self, agent_id: int) -> np.ndarray:
        """Indices of the records observed by one agent."""
        return np.flatnonzero(self.p == agent_id)

    def subset(self, idx: np.ndarray) -> "Dataset":
        idx = np.asarray(idx)
        take = lambda a: None if a is None else a[idx]
        return Dataset(
            x=self.x[idx],
            d=self.d[idx],
            p=self.p[idx],
            agents=self.agents,
            d_star=take(self.d_star),
            alpha_star=take(self.alpha_star),
            alpha_gamed=take(self.alpha_gamed),
        )


@dataclass(frozen=True)
class Ranking:
    """An ordered list of agent ids; position 0 is the most gaming-prone."""

    order: tuple[int, ...]

    def __post_init__(self) -> None:
        order = tuple(int(i) for i in self.order)
        object.__setattr__(self, "order", order)
        if sorted(order) != list(range(len(order))):
            raise ValueError("ranking must be a permutation of 0..P-1")

    def __len__(self) -> int:
        return len(self.order)

    def position_of(self, agent_id: int) -> int:
        return self.order.index(agent_id)


def _label_to_int(label: int | str) -> int:
    if isinstance(label, str):
        digest = hashlib.sha256(label.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    return int(label)


@dataclass(frozen=True)
class Rng:
    """Deterministic, splittable randomness rooted at a single 64-bit seed.

    Streams are Philox counter-based generators keyed by (seed, path).
    ``substream`` derives an independent child stream from integer or
    string labels, so (dataset index, stage name) pairs map to stable
    sub-streams that can be handed to parallel workers.
    """

    seed: int
    path: tuple[int, ...] = field(default=())

    def substream(self, *labels: int | str) -> "Rng":
        return Rng(self.seed, self.path + tuple(_label_to_int(l) for l in labels))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))


def split_dataset(
    ds: Dataset, train_frac: float, rng: Rng
) -> tuple[Dataset, Dataset]:
    """Uniform record-level random partition into (train, test).

    The train side gets floor(train_frac * n) records. Warns if any
    agent ends up absent from either split.
    """
    if ds.n_records == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    n = ds.n_records
    n_train = int(np.floor(train_frac * n))
    perm = rng.generator().permutation(n)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    train, test = ds.subset(train_idx), ds.subset(test_idx)
    for name, split in (("train", train), ("test", test)):
        present = set(np.unique(split.p).tolist())
        missing = [a.id for a in ds.agents if a.id not in present]
        if missing:
            warnings.warn(
                f"agents {missing} have no records in the {name} split",
                stacklevel=2,
            )
    return train, test


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------

def write_dataset_csv(ds: Dataset, path) -> None:
    """Write `agent_id,d,x0,...[,d_star,alpha_star,alpha_gamed]` rows."""
    dim = ds.covariate_dim
    hidden = ds.d_star is not None and ds.alpha_star is not None and ds.alpha_gamed is not None
    cols = ["agent_id", "d"] + [f"x{j}" for j in range(dim)]
    if hidden:
        cols += ["d_star", "alpha_star", "alpha_gamed"]
    lines = [",".join(cols)]
    for i in range(ds.n_records):
        row = [str(int(ds.p[i])), str(int(ds.d[i]))]
        row += [format_float(v) for v in ds.x[i]]
        if hidden:
            row += [
                str(int(ds.d_star[i])),
                format_float(ds.alpha_star[i]),
                format_float(ds.alpha_gamed[i]),
            ]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def read_dataset_csv(path, lambdas: Sequence[float] | None = None) -> Dataset:
    """Read a dataset CSV; ``lambdas`` (indexed by agent id) is optional."""
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        body = f.read().strip()
    if not body:
        raise ValueError(f"dataset file {path} has no records")
    data = np.array(
        [[float(v) for v in line.split(",")] for line in body.splitlines()]
    )
    col = {name: j for j, name in enumerate(header)}
    if "agent_id" not in col or "d" not in col:
        raise ValueError("dataset CSV must have agent_id and d columns")
    xcols = [c for c in header if c.startswith("x") and c[1:].isdigit()]
    xcols.sort(key=lambda c: int(c[1:]))
    p = data[:, col["agent_id"]].astype(int)
    ids = sorted(set(p.tolist()))
    agents = tuple(
        AgentSpec(i, None if lambdas is None else float(lambdas[i])) for i in ids
    )
    hidden = all(c in col for c in ("d_star", "alpha_star", "alpha_gamed"))
    return Dataset(
        x=data[:, [col[c] for c in xcols]],
        d=data[:, col["d"]].astype(int),
        p=p,
        agents=agents,
        d_star=data[:, col["d_star"]] if hidden else None,
        alpha_star=data[:, col["alpha_star"]] if hidden else None,
        alpha_gamed=data[:, col["alpha_gamed"]] if hidden else None,
    )
