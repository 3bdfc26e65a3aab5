"""Traveling waves and spreading fronts for a two-species chemotaxis
competition system: hypothesis checking, envelope construction, a
fixed-point wave solver, and time-dependent experiments."""

from .grids import Field, Grid
from .params import (DerivedConstants, HypothesisReport, Params,
                     check_hypotheses, derive_bounds, params_from_config,
                     params_to_config)

__version__ = "0.1.0"

__all__ = [
    "Field", "Grid", "Params", "DerivedConstants", "HypothesisReport",
    "check_hypotheses", "derive_bounds", "params_from_config",
    "params_to_config", "__version__",
]
