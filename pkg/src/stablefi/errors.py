"""Exception hierarchy shared by all engines."""


class StableFIError(Exception):
    """Base class for every error raised by this package."""

    #: machine-readable identifier used in CLI error objects
    code = "error"


class InvalidParam(StableFIError, ValueError):
    code = "invalid_param"


class NonIntegrable(StableFIError):
    code = "non_integrable"


class CriterionInapplicable(StableFIError):
    code = "criterion_inapplicable"


class QuadDiverged(StableFIError, ArithmeticError):
    code = "quad_diverged"


class SmoothnessViolation(StableFIError):
    code = "smoothness_violation"


class SolverFailure(StableFIError):
    code = "solver_failure"


class GridTooCoarse(StableFIError):
    code = "grid_too_coarse"


class DisjointWindows(StableFIError, ValueError):
    code = "disjoint_windows"


class ConfigError(StableFIError, ValueError):
    code = "config_error"
