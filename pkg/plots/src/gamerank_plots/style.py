"""Pinned figure style: detector markers, colors, deterministic output."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

# naive baselines: triangles; anomaly detectors: circles; causal
# effect estimators: crosses.
DETECTOR_MARKERS = {
    "payout": "v",
    "random": "v",
    "knn": "o",
    "ecod": "o",
    "s_learner": "x",
    "t_learner": "x",
    "s_ipw": "x",
    "psm": "x",
}
DEFAULT_MARKER = "."

_COLORS = plt.rcParams["axes.prop_cycle"].by_key()["color"]


def marker_for(detector: str, overrides: dict[str, str] | None = None) -> str:
    if overrides and detector in overrides:
        return overrides[detector]
    return DETECTOR_MARKERS.get(detector, DEFAULT_MARKER)


def color_for(detector: str) -> str:
    known = sorted(DETECTOR_MARKERS)
    if detector in known:
        return _COLORS[known.index(detector) % len(_COLORS)]
    return "dimgray"


def apply_style() -> None:
    plt.rcParams.update(
        {
            "figure.dpi": 120,
            "savefig.dpi": 120,
            "font.size": 9,
            "axes.grid": True,
            "grid.alpha": 0.3,
            "legend.fontsize": 8,
            "svg.hashsalt": "gamerank-plots",  # deterministic SVG ids
        }
    )


def save_figure(fig, out_base) -> list[str]:
    """Write PNG and SVG next to each other; returns the paths."""
    paths = []
    for ext in ("png", "svg"):
        path = f"{out_base}.{ext}"
        # dropping the date keeps re-runs byte-identical
        fig.savefig(path, metadata={"Date": None} if ext == "svg" else None)
        paths.append(path)
    return paths
