"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration or violated precondition on inputs."""


class NumericalFailure(RuntimeError):
    """Base class for failures of the iterative numerical algorithms."""


class DegenerateKernel(NumericalFailure):
    """The derivative kernel vanishes (to tolerance) on the whole scan horizon."""


class LineSearchFailed(NumericalFailure):
    """Backtracking exhausted its halvings without meeting the Armijo test."""


class Stalled(NumericalFailure):
    """Steering gave up after too many consecutive probe/line-search failures."""

    def __init__(self, message, retry_log=None):
        super().__init__(message)
        self.retry_log = list(retry_log or [])
