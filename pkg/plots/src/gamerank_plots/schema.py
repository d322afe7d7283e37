"""CSV readers with column validation for the harness output schemas."""

from __future__ import annotations

from pathlib import Path

import numpy as np

CURVES_COLUMNS = (
    "detector",
    "k",
    "sensitivity_mean",
    "sensitivity_std",
    "dcg_mean",
    "dcg_std",
)
AUSC_COLUMNS = ("mean_range", "detector", "ausc_mean", "ausc_std")


class SchemaError(ValueError):
    """An input CSV does not match the expected harness schema."""


def _read_table(path: Path, required: tuple[str, ...]) -> dict[str, list[str]]:
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        rows = [line.strip().split(",") for line in f if line.strip()]
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing required column '{col}'")
    idx = {col: header.index(col) for col in header}
    return {col: [row[idx[col]] for row in rows] for col in header}


def read_curves(path) -> dict[str, dict[str, np.ndarray]]:
    """Per-detector k/sensitivity/dcg arrays from one curves CSV."""
    table = _read_table(Path(path), CURVES_COLUMNS)
    out: dict[str, dict[str, np.ndarray]] = {}
    detectors = sorted(set(table["detector"]))
    det_col = np.array(table["detector"])
    for det in detectors:
        rows = np.flatnonzero(det_col == det)
        order = rows[np.argsort([int(table["k"][i]) for i in rows])]
        out[det] = {
            "k": np.array([int(table["k"][i]) for i in order]),
            "sensitivity_mean": np.array([float(table["sensitivity_mean"][i]) for i in order]),
            "sensitivity_std": np.array([float(table["sensitivity_std"][i]) for i in order]),
            "dcg_mean": np.array([float(table["dcg_mean"][i]) for i in order]),
            "dcg_std": np.array([float(table["dcg_std"][i]) for i in order]),
        }
    return out


def read_ausc_summary(path) -> dict[str, dict[str, np.ndarray]]:
    """Per-detector mean_range/ausc arrays from the summary CSV."""
    table = _read_table(Path(path), AUSC_COLUMNS)
    out: dict[str, dict[str, np.ndarray]] = {}
    det_col = np.array(table["detector"])
    for det in sorted(set(table["detector"])):
        rows = np.flatnonzero(det_col == det)
        order = rows[np.argsort([float(table["mean_range"][i]) for i in rows])]
        out[det] = {
            "mean_range": np.array([float(table["mean_range"][i]) for i in order]),
            "ausc_mean": np.array([float(table["ausc_mean"][i]) for i in order]),
            "ausc_std": np.array([float(table["ausc_std"][i]) for i in order]),
        }
    return out
