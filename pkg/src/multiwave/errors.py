"""Exception types raised across the package.

Every exception carries a short ``reason`` code so the command line can print
a single machine-parsable failure line.
"""


class MultiwaveError(Exception):
    reason = "error"


class GridError(MultiwaveError, ValueError):
    reason = "invalid-grid"


class NonFiniteError(MultiwaveError, ValueError):
    reason = "non-finite"


class OperatorError(MultiwaveError, ValueError):
    reason = "invalid-operator"


class NotAbsolutePositiveError(OperatorError):
    reason = "not-absolute-positive"


class MultipointConditionError(MultiwaveError, ValueError):
    reason = "multipoint-nondegeneracy"


class SingularModeError(MultiwaveError, ArithmeticError):
    """One or more Fourier modes have a (near-)singular multipoint system."""

    reason = "singular-multipoint-mode"

    def __init__(self, message, modes=()):
        super().__init__(message)
        self.modes = list(modes)


class ExponentError(MultiwaveError, ValueError):
    reason = "invalid-exponent"


class NonConvergenceError(MultiwaveError, RuntimeError):
    reason = "picard-nonconvergence"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DivergenceError(NonConvergenceError):
    reason = "picard-divergence"


class WindowCollapseError(MultiwaveError, RuntimeError):
    reason = "window-collapse"

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class StabilityError(MultiwaveError, ValueError):
    reason = "rk4-unstable-step"


class ConfigError(MultiwaveError, ValueError):
    reason = "config-error"

    def __init__(self, message, line=None, reason=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
        if reason is not None:
            self.reason = reason
