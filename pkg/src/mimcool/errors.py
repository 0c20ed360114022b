"""Exception types shared across the calculator."""


class MimcoolError(Exception):
    """Base class for all calculator errors."""


class ConfigError(MimcoolError, ValueError):
    """Invalid configuration value.

    ``field`` names the offending configuration entry.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class TruncationError(MimcoolError):
    """Series truncation could not meet its tolerance below the hard cap."""

    def __init__(self, message, tail_estimate):
        self.tail_estimate = tail_estimate
        super().__init__(f"{message} (tail estimate {tail_estimate:.3e})")


class NoConvergence(MimcoolError):
    def __init__(self, message, residual):
        self.residual = residual
        super().__init__(f"{message} (best residual {residual:.3e})")


class RootNotBracketed(MimcoolError):
    pass


class EigenFailure(MimcoolError):
    pass


class NearPole(MimcoolError, ZeroDivisionError):
    pass


class Unstable(MimcoolError):
    """The linearized fluctuation dynamics have no steady state."""


class SingularSystem(MimcoolError):
    pass


class QuadratureStall(MimcoolError):
    pass
