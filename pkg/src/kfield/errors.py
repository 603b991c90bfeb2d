"""Exception hierarchy shared by every kfield module."""


class KFieldError(Exception):
    """Base class for all kfield errors."""


class DomainError(KFieldError, ValueError):
    """Metric coefficient or state outside the admissible domain."""


class SingularTorsionError(DomainError):
    """g_oo within the guard band of 0 or 1, where the torsion choice diverges."""


class NonFiniteError(KFieldError, FloatingPointError):
    pass


class SuperluminalError(KFieldError):
    pass


class StepError(KFieldError):
    """Integrator produced a non-finite state."""


class StabilityError(KFieldError):
    """Explicit wave stepping requested with a CFL-violating time step."""


class ParseError(KFieldError):
    pass


class SchemaError(KFieldError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class MismatchError(KFieldError):
    pass


class NonConvergedWarning(UserWarning):
    """Lyapunov estimate still drifting between the last two horizon doublings."""
