class StabilityViolation(ArithmeticError):
    """Expected adversarial count per jumper cycle is not below one."""


class NonConvergence(ArithmeticError):
    """The stationary recursion hit its state cap before the residual was small enough."""
