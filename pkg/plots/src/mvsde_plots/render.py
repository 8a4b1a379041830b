"""Log-log convergence figures from experiment CSV files.

Reads only the CSV emitted by the simulation CLI (it never imports or
invokes the simulator), scatters the chosen columns on log-log axes, fits a
least-squares line in log space, and optionally overlays a dashed
reference-slope line anchored at the geometric center of the data.  The
fitted slope is echoed in the legend and returned.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["FigureSpec", "RenderResult", "SchemaError", "NonPositiveValue",
           "fit_loglog", "read_points", "render", "main"]


class SchemaError(Exception):
    """A requested column is missing from the CSV."""


class NonPositiveValue(Exception):
    """A value to be drawn on a log axis is zero or negative."""


@dataclass
class FigureSpec:
    """What to plot and where to write it."""

    inputs: List[str]
    x_column: str
    y_column: str
    output: str
    ref_slope: Optional[float] = None
    title: str = ""
    x_label: str = ""
    y_label: str = ""


@dataclass
class RenderResult:
    """Echo of what was drawn."""

    fitted_slope: float
    intercept: float
    residual: float
    ref_slope: Optional[float]
    n_points: int
    output: str


def fit_loglog(points: Sequence[Tuple[float, float]]) -> Tuple[float, float, float]:
    """Least-squares line through (log x, log y); returns slope, intercept,
    RMS residual."""
    if len(points) < 3:
        raise SchemaError(f"need >= 3 points for a slope fit, got {len(points)}")
    lx = np.log([p[0] for p in points])
    ly = np.log([p[1] for p in points])
    mx, my = lx.mean(), ly.mean()
    sxx = float(((lx - mx) ** 2).sum())
    if sxx == 0.0:
        raise SchemaError("all x values coincide; slope undefined")
    slope = float(((lx - mx) * (ly - my)).sum() / sxx)
    intercept = my - slope * mx
    residual = math.sqrt(float(((ly - (slope * lx + intercept)) ** 2).mean()))
    return slope, float(intercept), residual


def read_points(paths: Sequence[str], x_column: str,
                y_column: str) -> List[Tuple[float, float]]:
    """Collect (x, y) pairs from the CSVs, validating schema and positivity."""
    points = []
    for path in paths:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            for column in (x_column, y_column):
                if column not in header:
                    raise SchemaError(
                        f"{path}: column {column!r} not in header {header}")
            for line, row in enumerate(reader, start=2):
                try:
                    x = float(row[x_column])
                    y = float(row[y_column])
                except (TypeError, ValueError):
                    raise SchemaError(
                        f"{path}:{line}: non-numeric {x_column}/{y_column}"
                    ) from None
                if x <= 0 or y <= 0:
                    raise NonPositiveValue(
                        f"{path}:{line}: ({x}, {y}) cannot go on log axes")
                points.append((x, y))
    if not points:
        raise SchemaError("no data rows found")
    return points


def build_figure(spec: FigureSpec):
    """Assemble the matplotlib figure; returns (figure, RenderResult)."""
    points = read_points(spec.inputs, spec.x_column, spec.y_column)
    xs = np.array(sorted(p[0] for p in points))
    slope, intercept, residual = fit_loglog(points)

    fig, ax = plt.subplots(figsize=(7, 5.5))
    ax.loglog([p[0] for p in points], [p[1] for p in points], "ko",
              label="measured")
    ax.loglog(xs, np.exp(intercept + slope * np.log(xs)), "k-",
              label=f"fit: slope {slope:.3f}")
    if spec.ref_slope is not None:
        # anchor the dashed guide at the geometric center of the fit
        mid_x = math.exp(np.log(xs).mean())
        mid_y = math.exp(intercept + slope * math.log(mid_x))
        ref = mid_y * (xs / mid_x) ** spec.ref_slope
        ax.loglog(xs, ref, "k--", label=f"reference slope {spec.ref_slope:g}")
    ax.set_xlabel(spec.x_label or spec.x_column)
    ax.set_ylabel(spec.y_label or spec.y_column)
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    result = RenderResult(
        fitted_slope=slope,
        intercept=intercept,
        residual=residual,
        ref_slope=spec.ref_slope,
        n_points=len(points),
        output=spec.output,
    )
    return fig, result


def render(spec: FigureSpec) -> RenderResult:
    """Render the figure to ``spec.output`` (PNG or SVG by extension)."""
    fig, result = build_figure(spec)
    try:
        fig.savefig(spec.output, bbox_inches="tight")
    finally:
        plt.close(fig)
    return result


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mvsde-plot",
        description="log-log convergence figure from experiment CSV files",
    )
    parser.add_argument("--input", action="append", required=True,
                        help="CSV file (repeatable)")
    parser.add_argument("--x", required=True, help="x column name")
    parser.add_argument("--y", required=True, help="y column name")
    parser.add_argument("--ref-slope", type=float, default=None)
    parser.add_argument("--out", required=True, help="output image (.png/.svg)")
    parser.add_argument("--title", default="")
    ns = parser.parse_args(argv)
    spec = FigureSpec(inputs=ns.input, x_column=ns.x, y_column=ns.y,
                      output=ns.out, ref_slope=ns.ref_slope, title=ns.title)
    try:
        result = render(spec)
    except (SchemaError, NonPositiveValue, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.output}: fitted slope {result.fitted_slope:.4f} "
          f"over {result.n_points} points")
    return 0


if __name__ == "__main__":
    sys.exit(main())
