"""Exception hierarchy. CLI exit codes are attached to the classes."""


class FluxkitError(Exception):
    exit_code = 3


class InvalidDesignError(FluxkitError, ValueError):
    exit_code = 2


class ConfigError(FluxkitError, ValueError):
    exit_code = 2


class WorkingPointError(FluxkitError, ValueError):
    """Raised when an operation needs the flux sweet spot and the design is elsewhere."""

    exit_code = 2


class BasisTooSmallError(FluxkitError, ValueError):
    exit_code = 3


class NumericalFailure(FluxkitError, RuntimeError):
    def __init__(self, message, worst_residual=None):
        super().__init__(message)
        self.worst_residual = worst_residual


class ConvergenceFailure(NumericalFailure):
    pass


class BasisGrowthFailure(NumericalFailure):
    pass


class BudgetError(FluxkitError, ValueError):
    """Full-model state space would exceed the dimension budget."""

    exit_code = 3


class SweepFailure(NumericalFailure):
    pass


class FitFailure(NumericalFailure):
    pass


class NoFeasibleDesign(FluxkitError):
    exit_code = 4

    def __init__(self, message, nearest_miss=None):
        super().__init__(message)
        self.nearest_miss = nearest_miss
