"""Interacting-particle tamed Euler-Maruyama simulation of neutral
multiple-delay mean-field SDEs, with experiment harnesses for strong
convergence in the step size, particle-count scaling, moment sweeps and a
mean-field ODE oracle."""

from .engine import (ParticleEnsemble, SimulationResult, TamingConfig, init,
                     simulate, step, tame_drift)
from .errors import (CapExceeded, ConfigError, CountMismatch, DeltaOutOfRange,
                     DimensionMismatch, IncommensurableGrid,
                     ModelEvaluationError, MvsdeError, NonFiniteState,
                     OracleMismatch, SlopeUndefined)
from .experiments import (BLOWUP_THRESHOLD, chaos_study, convergence_study,
                          meanfield_oracle, moment_sweep)
from .grid import TimeGrid, build as build_grid, lag_index
from .measure import (EmpiricalView, fg_rate_check, moment_norm,
                      wasserstein_1d, wasserstein_exact, wasserstein_sliced)
from .models import (GrowthMeta, ModelSpec, builtin, builtin_names,
                     eval_diffusion, eval_drift, eval_neutral)
from .noise import IncrementSource, NoiseKey, coarse_increment, fine_increment
from .report import ExperimentReport, fit_slope

__version__ = "0.1.0"
