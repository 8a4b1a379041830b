"""Interacting-particle tamed Euler-Maruyama stepper.

The ensemble advances the neutral bookkeeping value

    Z_i(k) = X_i(t_k) - D(X_i(t_{k-M}))

by one explicit step per grid node,

    Z_i(k+1) = Z_i(k) + a Delta + b . dB_i(k),
    X_i(t_{k+1}) = Z_i(k+1) + D(X_i(t_{k+1-M})),

where `a` is the (optionally tamed) drift and `b` the diffusion, both
evaluated on the lagged states of particle i and the lagged cross-particle
empirical measures, which are computed once per step and shared by all
particles.  Histories live in a ring buffer of depth M+1, so memory stays
O(N * M * d) regardless of the horizon.

Untamed mode exists purely as a divergence witness: a non-finite state is
reported as :class:`NonFiniteState` (a clean outcome carrying particle,
step and quantity), never as a crash.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from .errors import ConfigError, NonFiniteState
from .grid import TimeGrid
from .measure import EmpiricalView
from .models import ModelSpec
from .noise import IncrementSource

__all__ = ["TamingConfig", "ParticleEnsemble", "SimulationResult",
           "tame_drift", "init", "step", "simulate"]


@dataclass(frozen=True)
class TamingConfig:
    """Taming exponent gamma in (0, 1/2]; tamed=False gives classical EM."""

    gamma: float = 0.5
    tamed: bool = True

    def __post_init__(self):
        if self.tamed and not 0 < self.gamma <= 0.5:
            raise ConfigError(f"gamma must lie in (0, 1/2], got {self.gamma}")


def tame_drift(alpha, delta: float, gamma: float):
    """Tame a drift vector: alpha / (1 + delta^gamma * |alpha|).

    Keeps the direction, scales the magnitude to at most
    min(delta^-gamma, |alpha|).  `alpha` may carry leading batch axes; the
    norm is Euclidean over the last axis.
    """
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if not 0 < gamma <= 0.5:
        raise ValueError(f"gamma must lie in (0, 1/2], got {gamma}")
    alpha = np.asarray(alpha, dtype=float)
    norm = np.linalg.norm(alpha, axis=-1, keepdims=True)
    return alpha / (1.0 + delta**gamma * norm)


@dataclass
class ParticleEnsemble:
    """Mutable simulation state: ring buffer of histories plus Z values."""

    model: ModelSpec
    grid: TimeGrid
    n_particles: int
    ring: np.ndarray            # (M+1, N, d); slot k % (M+1) holds X(t_k)
    z: np.ndarray               # (N, d)
    step: int = 0
    running_sup: np.ndarray = None  # (N,), max_k |X(t_k)| over k >= 0

    @property
    def depth(self) -> int:
        return self.ring.shape[0]

    def state_at(self, k: int) -> np.ndarray:
        """States at grid node k (valid for step-M <= k <= step)."""
        if not self.step - self.grid.big_m <= k <= self.step:
            raise IndexError(f"node {k} is outside the retained window")
        return self.ring[k % self.depth]

    def audit_neutral(self, tol: float = 1e-12) -> None:
        """Check Z against its reconstruction from the stored histories.

        The comparison is relative to the magnitudes involved: after the
        X = Z + D update the reconstruction X - D cancels, so agreement can
        only hold up to roundoff of the largest participating term.
        """
        x_now = self.state_at(self.step)
        d_val = np.asarray(self.model.neutral(
            self.state_at(self.step - self.grid.big_m)), dtype=float)
        recon = x_now - d_val
        scale = np.maximum(1.0, np.maximum(np.abs(x_now), np.abs(d_val)))
        err = np.abs(recon - self.z) / scale
        worst = float(err.max())
        if worst > tol:
            raise RuntimeError(
                f"neutral bookkeeping drifted: relative error {worst:.3e} "
                f"at step {self.step}"
            )


def init(model: ModelSpec, grid: TimeGrid, n_particles: int,
         seed: int = 0) -> ParticleEnsemble:
    """Fill histories with the initial path on t_{-M}..t_0 and set Z(0)."""
    if n_particles < 1:
        raise ConfigError("n_particles must be >= 1")
    if n_particles == 1:
        warnings.warn(
            "N=1 ensemble: empirical measures degenerate to self-interaction",
            stacklevel=2,
        )
    big_m = grid.big_m
    depth = big_m + 1
    times = np.array([float(grid.time(k)) for k in range(-big_m, 1)])
    path = np.asarray(model.initial_path(times), dtype=float)
    if path.shape != (depth, model.dim_state):
        raise ConfigError(
            f"initial path returned shape {path.shape}, "
            f"expected {(depth, model.dim_state)}"
        )
    ring = np.empty((depth, n_particles, model.dim_state))
    slots = np.arange(-big_m, 1) % depth
    ring[slots] = path[:, None, :]
    if model.initial_sampler is not None:
        rng = np.random.default_rng([int(seed) % (1 << 63), 0x1A17])
        shifts = np.asarray(model.initial_sampler(rng, n_particles), dtype=float)
        if shifts.shape != (n_particles, model.dim_state):
            raise ConfigError("initial sampler must return an (n, d) array")
        ring[slots] += shifts[None, :, :]
    x0 = ring[0 % depth]
    x_oldest = ring[(-big_m) % depth]
    z = x0 - np.asarray(model.neutral(x_oldest), dtype=float)
    if not np.all(np.isfinite(z)):
        raise NonFiniteState("initial neutral value is non-finite", step=0,
                             quantity="neutral")
    return ParticleEnsemble(
        model=model,
        grid=grid,
        n_particles=n_particles,
        ring=ring,
        z=z,
        step=0,
        running_sup=np.linalg.norm(x0, axis=-1),
    )


def _first_bad(arr) -> Optional[int]:
    bad = np.argwhere(~np.isfinite(np.asarray(arr)))
    return int(bad[0][0]) if len(bad) else None


def step(ensemble: ParticleEnsemble, model: ModelSpec, taming: TamingConfig,
         source) -> None:
    """Advance every particle by one grid step (in place).

    `source` provides the Brownian increments: any object with an
    ``increments(k) -> (N, m)`` method, normally a
    :class:`~mvsde.noise.IncrementSource`.
    """
    k = ensemble.step
    grid = ensemble.grid
    if k >= grid.big_mt:
        raise ValueError(f"horizon reached: step {k} of {grid.big_mt}")
    depth = ensemble.depth
    ring = ensemble.ring
    dt = float(grid.delta)

    states = []
    views = []
    view_cache: Dict[int, EmpiricalView] = {}
    for offset in grid.lag_offsets:
        col = ring[(k - offset) % depth]
        states.append(col)
        if offset not in view_cache:
            view_cache[offset] = EmpiricalView(col)
        views.append(view_cache[offset])

    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        alpha = np.asarray(model.drift(states, views), dtype=float)
        if not np.all(np.isfinite(alpha)):
            raise NonFiniteState(
                "drift evaluated to a non-finite value",
                particle=_first_bad(alpha), step=k, quantity="drift",
            )
        if taming.tamed:
            alpha = tame_drift(alpha, dt, taming.gamma)
        beta = np.asarray(model.diffusion(states, views), dtype=float)
        if not np.all(np.isfinite(beta)):
            raise NonFiniteState(
                "diffusion evaluated to a non-finite value",
                particle=_first_bad(beta), step=k, quantity="diffusion",
            )
        incr = source.increments(k)
        z_new = ensemble.z + alpha * dt + (beta * incr[:, None, :]).sum(axis=-1)
        x_new = z_new + np.asarray(
            model.neutral(ring[(k + 1 - grid.big_m) % depth]), dtype=float)
    if not np.all(np.isfinite(x_new)):
        raise NonFiniteState(
            "particle state became non-finite",
            particle=_first_bad(x_new), step=k + 1, quantity="state",
        )

    ring[(k + 1) % depth] = x_new
    ensemble.z = z_new
    ensemble.step = k + 1
    # finite but huge states can overflow the squared norm; saturating to inf
    # is fine for blow-up magnitude tracking
    with np.errstate(over="ignore"):
        np.maximum(ensemble.running_sup, np.linalg.norm(x_new, axis=-1),
                   out=ensemble.running_sup)


@dataclass
class SimulationResult:
    """Terminal states plus any requested captures."""

    terminal: np.ndarray                     # (N, d)
    running_sup: np.ndarray                  # (N,)
    n_steps: int
    seed: int
    ratio: int
    snapshots: Dict[int, np.ndarray] = field(default_factory=dict)
    probe_path: Optional[np.ndarray] = None  # (M_T+1, probe, d)


def simulate(model: ModelSpec, grid: TimeGrid, taming: TamingConfig,
             n_particles: int, seed: int, ratio: int = 1,
             snapshot_steps: Tuple[int, ...] = (),
             probe_count: int = 0,
             audit_every: int = 0) -> SimulationResult:
    """Run the full scheme from the initial segment to the horizon.

    Each scheme step consumes `ratio` fine Brownian increments of size
    delta/ratio, so runs at different resolutions driven from the same fine
    grid are pathwise coupled.  Output is bitwise deterministic in
    (model, grid, taming, n_particles, seed, ratio).
    """
    if ratio < 1:
        raise ConfigError("ratio must be >= 1")
    if probe_count > n_particles:
        raise ConfigError("probe_count cannot exceed n_particles")
    ensemble = init(model, grid, n_particles, seed)
    fine_delta = float(grid.delta / ratio)
    source = IncrementSource(seed, n_particles, model.dim_noise,
                             ratio=ratio, fine_delta=fine_delta)
    snapshots = {}
    snapshot_set = set(int(s) for s in snapshot_steps)
    probe = None
    if probe_count > 0:
        probe = np.empty((grid.big_mt + 1, probe_count, model.dim_state))
        probe[0] = ensemble.state_at(0)[:probe_count]
    if 0 in snapshot_set:
        snapshots[0] = ensemble.state_at(0).copy()

    try:
        for k in range(grid.big_mt):
            step(ensemble, model, taming, source)
            if probe is not None:
                probe[k + 1] = ensemble.state_at(k + 1)[:probe_count]
            if (k + 1) in snapshot_set:
                snapshots[k + 1] = ensemble.state_at(k + 1).copy()
            if audit_every and (k + 1) % audit_every == 0:
                ensemble.audit_neutral()
    except NonFiniteState as exc:
        raise NonFiniteState(
            f"{exc} [model={model.name}, delta={grid.delta}, seed={seed}, "
            f"ratio={ratio}]",
            particle=exc.particle, step=exc.step, quantity=exc.quantity,
        ) from None

    return SimulationResult(
        terminal=ensemble.state_at(grid.big_mt).copy(),
        running_sup=ensemble.running_sup.copy(),
        n_steps=grid.big_mt,
        seed=seed,
        ratio=ratio,
        snapshots=snapshots,
        probe_path=probe,
    )
