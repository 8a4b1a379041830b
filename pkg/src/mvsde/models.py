"""Coefficient interface for neutral multiple-delay mean-field SDEs.

A model is the quadruple (D, alpha, beta, xi): a neutral map applied to the
most-delayed state, drift and diffusion taking the tuple of lagged states
together with the tuple of empirical laws at the same lags, and an initial
path on [-rho, 0].  Coefficient callables must be vectorized over a leading
batch axis (states arrive as (..., d) arrays) and pure.

Measure arguments are passed as view objects exposing at least ``.mean``
(a (d,) array) and ``.samples``; the built-in models only use means, but
user models may consume the full sample cloud.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError, ModelEvaluationError

__all__ = ["GrowthMeta", "ModelSpec", "builtin", "builtin_names",
           "eval_drift", "eval_diffusion", "eval_neutral"]


@dataclass(frozen=True)
class GrowthMeta:
    """Polynomial growth exponents of the coefficient moduli.

    Declarative metadata only (never enforced at runtime): `l1`, `l2`, `l3`
    bound the growth of the drift-increment, delay-coupling and neutral
    moduli; `k_d` is the neutral contraction constant when the neutral map
    is globally Lipschitz with constant < 1, else None.
    """

    l1: float = 1.0
    l2: float = 1.0
    l3: float = 1.0
    k_d: Optional[float] = None

    @property
    def l_u(self) -> float:
        return max(self.l1, self.l2, self.l3)


@dataclass(frozen=True)
class ModelSpec:
    """Immutable description of one neutral delay mean-field SDE."""

    name: str
    dim_state: int
    dim_noise: int
    lags: Tuple[Fraction, ...]
    neutral: Callable
    drift: Callable
    diffusion: Callable
    initial_path: Callable
    growth_meta: GrowthMeta = GrowthMeta()
    initial_sampler: Optional[Callable] = None

    def __post_init__(self):
        if self.dim_state < 1 or self.dim_noise < 1:
            raise ConfigError("dimensions must be positive")
        lags = tuple(Fraction(x) for x in self.lags)
        object.__setattr__(self, "lags", lags)
        if lags[0] != 0:
            raise ConfigError("first lag must be 0")
        if any(b < a for a, b in zip(lags, lags[1:])):
            raise ConfigError("lags must be nondecreasing")
        if lags[-1] <= 0:
            raise ConfigError("largest lag must be positive (rho = 0 is rejected)")
        d0 = np.asarray(self.neutral(np.zeros(self.dim_state)), dtype=float)
        if not np.all(np.abs(d0) < 1e-12):
            raise ConfigError(f"neutral map must vanish at the origin, got D(0)={d0}")

    @property
    def n_lags(self) -> int:
        return len(self.lags)

    @property
    def rho(self) -> Fraction:
        return self.lags[-1]


def _check_inputs(model: ModelSpec, states, measures):
    if len(states) != model.n_lags or len(measures) != model.n_lags:
        raise ConfigError(
            f"model {model.name} expects {model.n_lags} lagged states/measures, "
            f"got {len(states)}/{len(measures)}"
        )
    return [np.asarray(s, dtype=float) for s in states]


def _raise_non_finite(model: ModelSpec, out, what: str, states=None):
    bad = np.argwhere(~np.isfinite(np.asarray(out, dtype=float)))
    idx = tuple(int(i) for i in bad[0]) if len(bad) else None
    suspect_lags = None
    if states is not None:
        suspect_lags = [v for v, s in enumerate(states)
                        if not np.all(np.isfinite(s))]
    detail = ""
    if suspect_lags:
        times = [str(model.lags[v]) for v in suspect_lags]
        detail = f"; non-finite inputs at lag(s) {times}"
    raise ModelEvaluationError(
        f"{what} of model {model.name} returned a non-finite value "
        f"at index {idx}{detail}",
        model=model.name,
        lag_index=suspect_lags[0] if suspect_lags else idx,
    )


def eval_drift(model: ModelSpec, states: Sequence, measures: Sequence) -> np.ndarray:
    """Drift at one point: lagged states (each (d,)) and empirical views."""
    states = _check_inputs(model, states, measures)
    out = np.asarray(model.drift(states, measures), dtype=float)
    if not np.all(np.isfinite(out)):
        _raise_non_finite(model, out, "drift", states)
    return out


def eval_diffusion(model: ModelSpec, states: Sequence, measures: Sequence) -> np.ndarray:
    """Diffusion matrix (d, m) at one point."""
    states = _check_inputs(model, states, measures)
    out = np.asarray(model.diffusion(states, measures), dtype=float)
    if not np.all(np.isfinite(out)):
        _raise_non_finite(model, out, "diffusion", states)
    return out


def eval_neutral(model: ModelSpec, x) -> np.ndarray:
    """Neutral map D applied to one state."""
    out = np.asarray(model.neutral(np.asarray(x, dtype=float)), dtype=float)
    if not np.all(np.isfinite(out)):
        _raise_non_finite(model, out, "neutral map")
    return out


# ---------------------------------------------------------------------------
# Built-in models
#
# The engine always advances the bracket X - D(X(t - rho)).  Superlinear
# example 1 below has the cube *added* inside its bracket, so its neutral map
# is stored with the opposite sign, D(x) = -x^3 (likewise for example 2);
# this keeps one uniform engine formula for every model.
# ---------------------------------------------------------------------------


def _example1() -> ModelSpec:
    # Scalar equation, sorted lags (0, 0.2, 0.25, 0.4, 0.5, 2):
    #   d[Y + Y^3(t-2)] = [-2 Y + Y(t-.25) - 2 Y^5(t-2) + E Y(t-.25) - E Y(t-.5)] dt
    #                     + [Y + 0.25 Y(t-.2) + E Y(t-.4)] dB
    #   xi(t) = |t|^(1/2) + 4 on [-2, 0]

    def neutral(x):
        return -(x**3)

    def drift(s, v):
        out = (
            -2.0 * s[0][..., 0]
            + s[2][..., 0]
            - 2.0 * s[5][..., 0] ** 5
            + v[2].mean[0]
            - v[4].mean[0]
        )
        return out[..., None]

    def diffusion(s, v):
        out = s[0][..., 0] + 0.25 * s[1][..., 0] + v[3].mean[0]
        return out[..., None, None]

    def initial_path(t):
        t = np.asarray(t, dtype=float)
        return (np.sqrt(np.abs(t)) + 4.0)[..., None]

    return ModelSpec(
        name="example1",
        dim_state=1,
        dim_noise=1,
        lags=(
            Fraction(0),
            Fraction(1, 5),
            Fraction(1, 4),
            Fraction(2, 5),
            Fraction(1, 2),
            Fraction(2),
        ),
        neutral=neutral,
        drift=drift,
        diffusion=diffusion,
        initial_path=initial_path,
        growth_meta=GrowthMeta(l1=4.0, l2=4.0, l3=2.0),
    )


def _example2() -> ModelSpec:
    # Two-dimensional equation, sorted lags (0, 0.1, 0.4, 1, 4), scalar noise:
    #   bracket components Y1 + 2 sin(Y1(t-4)) and Y2 + 4 Y2^2(t-4)
    #   xi(t) = |t|^(2/3) + 1 componentwise on [-4, 0]

    def neutral(x):
        return np.stack([-2.0 * np.sin(x[..., 0]), -4.0 * x[..., 1] ** 2], axis=-1)

    def drift(s, v):
        y1, y2 = s[0][..., 0], s[0][..., 1]
        y1_d4, y2_d4 = s[4][..., 0], s[4][..., 1]
        c1 = (
            -3.0 * y2
            + s[1][..., 0]
            - 4.0 * y1_d4**3
            + v[2].mean[1]
            - 3.0 * v[3].mean[0]
        )
        w = y2 + 4.0 * y2_d4**2
        c2 = -4.0 * w * np.abs(w) + 30.0 * y2_d4**2 + 6.0 * y2 - 2.0 * y2_d4**5
        return np.stack([c1, c2], axis=-1)

    def diffusion(s, v):
        c1 = 2.0 * s[0][..., 1] + v[1].mean[0]
        c2 = 4.0 * s[0][..., 0] + v[1].mean[1]
        return np.stack([c1, c2], axis=-1)[..., None]

    def initial_path(t):
        t = np.asarray(t, dtype=float)
        val = np.abs(t) ** (2.0 / 3.0) + 1.0
        return np.stack([val, val], axis=-1)

    return ModelSpec(
        name="example2",
        dim_state=2,
        dim_noise=1,
        lags=(Fraction(0), Fraction(1, 10), Fraction(2, 5), Fraction(1), Fraction(4)),
        neutral=neutral,
        drift=drift,
        diffusion=diffusion,
        initial_path=initial_path,
        growth_meta=GrowthMeta(l1=4.0, l2=8.0, l3=1.0),
    )


def _linear(kappa=0.3, a=-1.0, b=0.5, c=0.5, sigma1=0.2, sigma2=0.1,
            rho2=Fraction(1, 2), rho3=Fraction(1), xi0=1.0) -> ModelSpec:
    """Fully linear model with every closed-form diagnostic available.

    Neutral map kappa*x, drift a*Y(t) + b*Y(t-rho2) + c*mean(t-rho3),
    diffusion sigma1*Y(t) + sigma2*mean(t), constant initial path xi0.
    The mean satisfies the deterministic neutral delay ODE obtained by
    dropping the diffusion, which the oracle experiment integrates directly.
    """
    kappa, a, b, c = float(kappa), float(a), float(b), float(c)
    sigma1, sigma2, xi0 = float(sigma1), float(sigma2), float(xi0)
    rho2, rho3 = Fraction(rho2), Fraction(rho3)
    if not 0 < rho2 <= rho3:
        raise ConfigError("linear model needs 0 < rho2 <= rho3")

    def neutral(x):
        return kappa * x

    def drift(s, v):
        return a * s[0] + b * s[1] + c * v[2].mean

    def diffusion(s, v):
        return (sigma1 * s[0] + sigma2 * v[0].mean)[..., None]

    def initial_path(t):
        t = np.asarray(t, dtype=float)
        return np.full(t.shape + (1,), xi0)

    return ModelSpec(
        name="linear",
        dim_state=1,
        dim_noise=1,
        lags=(Fraction(0), rho2, rho3),
        neutral=neutral,
        drift=drift,
        diffusion=diffusion,
        initial_path=initial_path,
        growth_meta=GrowthMeta(l1=1.0, l2=1.0, l3=1.0,
                               k_d=abs(kappa) if abs(kappa) < 1 else None),
    )


_BUILTINS = {"example1": _example1, "example2": _example2, "linear": _linear}


def builtin_names() -> Tuple[str, ...]:
    return tuple(sorted(_BUILTINS))


def builtin(name: str, **params) -> ModelSpec:
    """Construct a registered model, applying parameter overrides.

    Only the linear model has tunable parameters; passing overrides to the
    fixed examples raises :class:`ConfigError`, as does an unknown name.
    """
    try:
        factory = _BUILTINS[name]
    except KeyError:
        raise ConfigError(
            f"unknown model {name!r}; available: {', '.join(builtin_names())}"
        ) from None
    if name != "linear" and params:
        raise ConfigError(f"model {name!r} accepts no parameter overrides")
    if name == "linear":
        allowed = {"kappa", "a", "b", "c", "sigma1", "sigma2", "rho2", "rho3", "xi0"}
        unknown = set(params) - allowed
        if unknown:
            raise ConfigError(f"unknown linear-model parameters: {sorted(unknown)}")
    return factory(**params)
