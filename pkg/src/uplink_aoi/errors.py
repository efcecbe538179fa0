"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An argument lies outside its documented domain."""


class NumericError(ArithmeticError):
    """A numerical routine failed to reach its tolerance.

    Carries whatever diagnostics the routine had at the point of failure
    (best estimate, error estimate, bracketing interval, iteration count).
    """

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v!r}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"


class UnsupportedCase(ParameterError):
    """The requested evaluation path does not cover these parameters."""


class DegenerateDistribution(ArithmeticError):
    """The fitted distribution has (numerically) zero variance."""

    def __init__(self, mean):
        super().__init__(f"zero-variance distribution at {mean!r}")
        self.mean = mean
