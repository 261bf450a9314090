"""Fixed-effects binary-choice panel models with bias corrections.

The main entry points are :func:`panelbc.feglm.fit` for estimation,
:mod:`panelbc.biascorr` for coefficient corrections, :mod:`panelbc.ape` for
average partial effects and :mod:`panelbc.simlab` for Monte Carlo work.
"""

from .errors import (
    BandwidthTooLarge,
    Collinear,
    DataError,
    NoConvergence,
    NumericalError,
    PanelBCError,
)
from .families import Family
from .feglm import FitConfig, FitResult, fit, offset_refit
from .panel import PanelData, build_panel, drop_noninformative, panel_from_arrays

__version__ = "0.1.0"

__all__ = [
    "BandwidthTooLarge",
    "Collinear",
    "DataError",
    "Family",
    "FitConfig",
    "FitResult",
    "NoConvergence",
    "NumericalError",
    "PanelBCError",
    "PanelData",
    "build_panel",
    "drop_noninformative",
    "fit",
    "offset_refit",
    "panel_from_arrays",
    "__version__",
]
