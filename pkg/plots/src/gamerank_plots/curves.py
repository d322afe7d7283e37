"""Two-panel sensitivity/DCG curve figures from harness curve CSVs.

Standalone use:
    gamerank-plot-curves --input RESULTS/report --out FIGURES
renders one figure per curves_mr*.csv file found in the input directory.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib.pyplot as plt

from .schema import SchemaError, read_curves
from .style import apply_style, color_for, marker_for, save_figure

__all__ = ["CurvesSpec", "plot_curves", "main"]


@dataclass(frozen=True)
class CurvesSpec:
    input_csv: Path
    out_base: Path  # extension-less; .png and .svg are appended
    title: str = ""
    markers: dict[str, str] = field(default_factory=dict)


def plot_curves(spec: CurvesSpec) -> list[str]:
    """Mean +/- std sensitivity (left) and DCG (right) across audits."""
    curves = read_curves(spec.input_csv)
    apply_style()
    fig, (ax_sens, ax_dcg) = plt.subplots(1, 2, figsize=(9, 3.4), constrained_layout=True)
    for det, series in curves.items():
        style = dict(
            marker=marker_for(det, spec.markers),
            color=color_for(det),
            markersize=4,
            linewidth=1.0,
            label=det,
        )
        for ax, mean_key, std_key in (
            (ax_sens, "sensitivity_mean", "sensitivity_std"),
            (ax_dcg, "dcg_mean", "dcg_std"),
        ):
            k = series["k"]
            mean, std = series[mean_key], series[std_key]
            ax.plot(k, mean, **style)
            ax.fill_between(k, mean - std, mean + std, color=style["color"], alpha=0.15)
    ax_sens.set_xlabel("agents audited")
    ax_sens.set_ylabel("top-m sensitivity")
    ax_sens.set_ylim(-0.02, 1.05)
    ax_dcg.set_xlabel("agents audited")
    ax_dcg.set_ylabel("DCG")
    ax_sens.legend(loc="lower right")
    if spec.title:
        fig.suptitle(spec.title)
    paths = save_figure(fig, spec.out_base)
    plt.close(fig)
    return paths


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Render sensitivity/DCG curve figures.")
    parser.add_argument("--input", type=Path, required=True,
                        help="directory with curves_mr*.csv files (or one CSV)")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        inputs = (
            [args.input] if args.input.is_file()
            else sorted(args.input.glob("curves_mr*.csv"))
        )
        if not inputs:
            raise SchemaError(f"no curves_mr*.csv files under {args.input}")
        args.out.mkdir(parents=True, exist_ok=True)
        written = []
        for csv_path in inputs:
            stem = csv_path.stem  # curves_mr0.9
            spec = CurvesSpec(
                input_csv=csv_path,
                out_base=args.out / stem,
                title=stem.replace("curves_mr", "mean range "),
            )
            written += plot_curves(spec)
        print(f"wrote {len(written)} figure files to {args.out}")
        return 0
    except (SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
