"""Delay-aligned uniform time grid with exact rational arithmetic.

All grid quantities (step, horizon, lag offsets) are kept as integers or
`fractions.Fraction`, so delay lookups address grid nodes exactly and
reconstructed times never accumulate floating-point drift.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Tuple

from .errors import DeltaOutOfRange, IncommensurableGrid

__all__ = ["TimeGrid", "build", "lag_index"]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid of step `delta` with integer offsets for every delay.

    ``big_m * delta`` equals the largest delay and ``big_mt * delta`` the
    horizon, exactly.  ``lag_offsets[v] * delta`` recovers each (possibly
    snapped) delay.  ``snap_distances`` records the signed perturbation
    ``snapped - requested`` applied to each delay (all zero when
    ``snapped`` is False).
    """

    delta: Fraction
    big_m: int
    big_mt: int
    lag_offsets: Tuple[int, ...]
    horizon: Fraction
    snapped: bool = False
    snap_distances: Tuple[Fraction, ...] = field(default=())

    @property
    def lags(self) -> Tuple[Fraction, ...]:
        return tuple(k * self.delta for k in self.lag_offsets)

    @property
    def rho(self) -> Fraction:
        return self.big_m * self.delta

    def time(self, step: int) -> Fraction:
        """Exact rational time of grid node `step` (may be negative)."""
        return step * self.delta


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # Floats are only admitted when they are exactly the intended rational,
        # which cannot be checked here; callers must pass Fraction/str/int.
        raise TypeError("pass delays and steps as Fraction, str or int, not float")
    return Fraction(value)


def build(lags: Sequence, horizon, delta, snap: bool = False) -> TimeGrid:
    """Build the grid for the given delays, horizon and step.

    With ``snap=False`` every delay and the horizon must be an integer
    multiple of ``delta`` (otherwise :class:`IncommensurableGrid` is raised,
    listing the offenders).  With ``snap=True`` each delay is moved to the
    nearest grid node and the perturbation is recorded; the horizon still
    has to be exact.
    """
    delta = _as_fraction(delta)
    horizon = _as_fraction(horizon)
    lags = [_as_fraction(x) for x in lags]
    if not 0 < delta < 1:
        raise DeltaOutOfRange(f"delta must lie in (0, 1), got {delta}")
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if not lags or lags[0] != 0:
        raise ValueError("first lag must be 0")
    if any(b < a for a, b in zip(lags, lags[1:])):
        raise ValueError("lags must be nondecreasing")
    if lags[-1] <= 0:
        raise ValueError("largest lag must be positive")

    offending = [x for x in lags + [horizon] if (x / delta).denominator != 1]
    if offending and not snap:
        raise IncommensurableGrid(
            f"not integer multiples of delta={delta}: {offending}",
            offending_lags=offending,
        )
    if (horizon / delta).denominator != 1:
        raise IncommensurableGrid(
            f"horizon {horizon} is not an integer multiple of delta={delta}",
            offending_lags=[horizon],
        )

    offsets = []
    distances = []
    for x in lags:
        ratio = x / delta
        if ratio.denominator == 1:
            k = int(ratio)
            distances.append(Fraction(0))
        else:
            k = int(ratio + Fraction(1, 2))  # round half up, exactly
            distances.append(k * delta - x)
        offsets.append(k)
    if offsets[-1] < 1:
        raise IncommensurableGrid(
            f"largest delay {lags[-1]} snaps to zero at delta={delta}",
            offending_lags=[lags[-1]],
        )

    was_snapped = any(d != 0 for d in distances)
    if was_snapped:
        moved = [
            f"{x} -> {k * delta}" for x, k, d in zip(lags, offsets, distances) if d != 0
        ]
        logger.warning("snapped delays to the grid: %s", "; ".join(moved))

    return TimeGrid(
        delta=delta,
        big_m=offsets[-1],
        big_mt=int(horizon / delta),
        lag_offsets=tuple(offsets),
        horizon=horizon,
        snapped=was_snapped,
        snap_distances=tuple(distances),
    )


def lag_index(grid: TimeGrid, step: int, lag: int) -> int:
    """Grid index of delay `lag` (1-based) relative to node `step`.

    Negative results address the initial segment.
    """
    return step - grid.lag_offsets[lag - 1]
