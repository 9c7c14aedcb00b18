"""Exception hierarchy shared by all hotmrac modules."""


class MracError(Exception):
    """Base class for every error raised by hotmrac."""


class DimensionError(MracError, ValueError):
    """Array shapes are inconsistent with each other."""


class StabilityError(MracError, ValueError):
    """A matrix required to be Schur-stable is not."""


class ConvergenceError(MracError, RuntimeError):
    """An iterative solver hit its iteration cap."""


class GainConditionError(MracError, ValueError):
    """Adaptive-law gains violate a stability condition."""

    def __init__(self, condition, message=None):
        self.condition = condition
        super().__init__(message or f"gain condition violated: {condition}")


class ReferenceBoundError(MracError, ValueError):
    """A reference input exceeds the declared bound ``r_max``."""


class DivergenceError(MracError, RuntimeError):
    """A simulated state became non-finite or exceeded the divergence threshold."""

    def __init__(self, step, message=None):
        self.step = step
        super().__init__(message or f"closed loop diverged at step {step}")


class CertificateViolation(MracError, AssertionError):
    """A Lyapunov increment exceeded its proved upper bound."""

    def __init__(self, step, dV, bound):
        self.step = step
        self.dV = dV
        self.bound = bound
        super().__init__(
            f"Lyapunov certificate breached at step {step}: dV={dV!r} > bound={bound!r}"
        )


class ConfigError(MracError, ValueError):
    """Invalid run configuration; ``key`` carries the dotted path when known."""

    def __init__(self, message, key=None):
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)
