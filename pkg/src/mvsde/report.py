"""Experiment reports: slope fitting, CSV emission, JSON-lines sidecar.

CSV outputs are byte-deterministic for a fixed config and seed: floats are
written with shortest round-trip repr and the wall_ms column is emitted as 0
(a schema placeholder).  Measured wall times and timestamps live only in the
JSON-lines sidecar.
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .errors import SlopeUndefined

__all__ = ["fit_slope", "ExperimentReport", "make_run_id"]


def fit_slope(points: Sequence[Tuple[float, float]]) -> Tuple[float, float, float]:
    """Least-squares line through (log x, log y).

    Returns (slope, intercept, residual) where residual is the RMS of the
    log-scale fit residuals.  Requires at least three strictly positive
    points.
    """
    if len(points) < 3:
        raise SlopeUndefined(f"need >= 3 points to fit a slope, got {len(points)}")
    if any(x <= 0 or y <= 0 for x, y in points):
        raise SlopeUndefined("slope fit requires strictly positive points")
    lx = [math.log(x) for x, _ in points]
    ly = [math.log(y) for _, y in points]
    n = len(points)
    mx = sum(lx) / n
    my = sum(ly) / n
    sxx = sum((u - mx) ** 2 for u in lx)
    if sxx == 0:
        raise SlopeUndefined("slope fit requires at least two distinct x values")
    sxy = sum((u - mx) * (v - my) for u, v in zip(lx, ly))
    slope = sxy / sxx
    intercept = my - slope * mx
    rss = sum((v - (slope * u + intercept)) ** 2 for u, v in zip(lx, ly))
    return slope, intercept, math.sqrt(rss / n)


def make_run_id(kind: str, config: Dict) -> str:
    """Deterministic 12-hex-digit id derived from the experiment config."""
    blob = json.dumps({"kind": kind, "config": config}, sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class ExperimentReport:
    """Per-point records plus fitted slope and full config echo."""

    kind: str
    columns: Tuple[str, ...]
    rows: List[Dict]
    config: Dict
    slope: Optional[float] = None
    intercept: Optional[float] = None
    residual: Optional[float] = None
    annotations: Dict = field(default_factory=dict)
    wall_ms_total: float = 0.0

    @property
    def run_id(self) -> str:
        return make_run_id(self.kind, self.config)

    def fit(self, x_key: str, y_key: str) -> None:
        """Fit the log-log slope over the rows, if they admit one."""
        points = [(row[x_key], row[y_key]) for row in self.rows]
        try:
            self.slope, self.intercept, self.residual = fit_slope(points)
        except SlopeUndefined:
            self.slope = self.intercept = self.residual = None

    def to_csv(self) -> str:
        run_id = self.run_id
        lines = [",".join(self.columns)]
        for row in self.rows:
            cells = []
            for col in self.columns:
                if col == "run_id":
                    cells.append(run_id)
                elif col == "wall_ms":
                    cells.append("0")
                else:
                    cells.append(_fmt(row[col]))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    def to_jsonl(self) -> str:
        head = {
            "type": "report",
            "kind": self.kind,
            "run_id": self.run_id,
            "config": self.config,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "annotations": self.annotations,
            "wall_ms_total": self.wall_ms_total,
            "written_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        }
        lines = [json.dumps(head, sort_keys=True, default=str)]
        for row in self.rows:
            rec = {"type": "point", **row}
            lines.append(json.dumps(rec, sort_keys=True, default=str))
        return "\n".join(lines) + "\n"

    def write_jsonl(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_jsonl())

    def summary(self) -> str:
        if self.slope is not None:
            return (f"{self.kind} run {self.run_id}: fitted log-log slope "
                    f"{self.slope:.4f} over {len(self.rows)} points")
        return f"{self.kind} run {self.run_id}: {len(self.rows)} points (no slope)"
