"""Exception and warning types raised across the package.

Two families exist so callers (and the CLI exit codes) can tell bad input
apart from numerical trouble: :class:`DataError` and :class:`NumericalError`.
"""


class PanelBCError(Exception):
    """Base class for every error raised by this package."""


class DataError(PanelBCError):
    """Problems with the input panel itself."""


class NumericalError(PanelBCError):
    """Failures of an estimation or iteration routine."""


class DuplicateCell(DataError):
    """The same (individual, time) pair appears more than once."""


class RaggedRegressors(DataError):
    """Regressor vectors of different lengths were supplied."""


class EmptyPanel(DataError):
    """No observations are left after validation or pruning."""


class EmptySubpanel(DataError):
    """A sub-panel selector matched no observations."""


class InvalidRegressor(DataError):
    """A regressor flagged as binary contains values other than 0 and 1."""


class NonFiniteEta(NumericalError):
    """A linear predictor value is NaN or infinite."""


class DegenerateWeight(NumericalError):
    """A working weight underflowed to zero."""


class ZeroGroupWeight(NumericalError):
    """A fixed-effect group has a non-positive total weight."""


class NoConvergence(NumericalError):
    """An iterative routine hit its iteration cap."""


class Collinear(NumericalError):
    """Centered regressors are rank deficient."""


class BandwidthTooLarge(NumericalError):
    """The spectral bandwidth is not smaller than some individual's span."""


class SubpanelFitFailed(NumericalError):
    """A split-panel jackknife sub-panel could not be estimated."""

    def __init__(self, which, reason):
        super().__init__(f"sub-panel {which} failed: {reason}")
        self.which = which
        self.reason = reason


class UnknownTable(PanelBCError):
    """The requested table id has no registered design."""


class SingletonIndividual(UserWarning):
    """Individuals with a single observation were dropped."""
