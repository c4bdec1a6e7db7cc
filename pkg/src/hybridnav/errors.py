"""Exception types shared across the navigation stack."""


class HybridNavError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateAtGoal(HybridNavError, ValueError):
    """Robot position coincides with the goal, so the goal bearing is undefined."""


class ContractViolation(HybridNavError, ValueError):
    """An input breaks a declared bound (e.g. a disturbance above its maximum)."""


class InnovationError(HybridNavError, ArithmeticError):
    """Innovation covariance is singular or too badly conditioned to invert."""
