"""AUSC-vs-confounding panels from the harness summary CSV.

Standalone use:
    gamerank-plot-ausc --input RESULTS/report --out FIGURES
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib.pyplot as plt

from .schema import SchemaError, read_ausc_summary
from .style import apply_style, color_for, marker_for, save_figure

__all__ = ["AuscPanelSpec", "plot_ausc_panel", "main"]


@dataclass(frozen=True)
class AuscPanelSpec:
    input_csv: Path
    out_base: Path
    title: str = ""
    markers: dict[str, str] = field(default_factory=dict)


def plot_ausc_panel(spec: AuscPanelSpec) -> list[str]:
    """Mean +/- std AUSC per detector across confounding levels."""
    summary = read_ausc_summary(spec.input_csv)
    apply_style()
    fig, ax = plt.subplots(figsize=(5.2, 3.4), constrained_layout=True)
    for det, series in summary.items():
        x = series["mean_range"]
        mean, std = series["ausc_mean"], series["ausc_std"]
        color = color_for(det)
        ax.plot(x, mean, marker=marker_for(det, spec.markers), color=color,
                markersize=4, linewidth=1.0, label=det)
        ax.fill_between(x, mean - std, mean + std, color=color, alpha=0.15)
    ax.set_xlabel("covariate mean range (confounding strength)")
    ax.set_ylabel("AUSC")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="lower left", ncols=2)
    if spec.title:
        ax.set_title(spec.title)
    paths = save_figure(fig, spec.out_base)
    plt.close(fig)
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Render the AUSC-vs-confounding panel.")
    parser.add_argument("--input", type=Path, required=True,
                        help="directory with ausc_summary.csv (or the CSV itself)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        csv_path = args.input if args.input.is_file() else args.input / "ausc_summary.csv"
        if not csv_path.exists():
            raise SchemaError(f"no ausc_summary.csv under {args.input}")
        args.out.mkdir(parents=True, exist_ok=True)
        spec = AuscPanelSpec(input_csv=csv_path, out_base=args.out / "ausc_panel")
        written = plot_ausc_panel(spec)
        print(f"wrote {len(written)} figure files to {args.out}")
        return 0
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
