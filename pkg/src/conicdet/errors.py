"""Exception types raised across the package."""


class ConicDetError(Exception):
    """Base class; ``module`` names the subsystem that raised."""

    module = "conicdet"


class InvalidMap(ConicDetError):
    module = "rational_map"


class RootFindingFailure(ConicDetError):
    module = "rational_map"


class DegenerateCritical(ConicDetError):
    module = "rational_map"


class NonInvertible(ConicDetError):
    module = "local_frame"


class InfiniteCriticalValue(ConicDetError):
    module = "local_frame"


class QuadratureUnderflow(ConicDetError):
    module = "spectral"


class ConvergenceWarning(UserWarning):
    pass


class TailUnreliable(ConicDetError):
    module = "zeta_det"


class IllConditionedFit(ConicDetError):
    module = "zeta_det"


class CoincidentValues(ConicDetError):
    module = "tau_genus0"


class CollisionDetected(ConicDetError):
    module = "tau_genus0"


class TrackingLost(ConicDetError):
    module = "tau_genus0"


class HalfIntegerNu(ConicDetError):
    module = "perturbation"


class IncompleteGroup(ConicDetError):
    module = "perturbation"


class ConfigError(ConicDetError):
    module = "cli"
