"""Log-log figure rendering for simulation experiment CSVs."""

from .render import (FigureSpec, NonPositiveValue, RenderResult, SchemaError,
                     build_figure, fit_loglog, read_points, render)

__version__ = "0.1.0"
