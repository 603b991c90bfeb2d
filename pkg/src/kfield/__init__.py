"""K-field geometry of classical force interactions.

Modules: ``geometry`` (metric, connection, torsion, nonmetricity),
``dynamics`` (trajectories and their geodesic diagnostics), ``waves``
(dispersion on constant backgrounds), ``stability`` (Lyapunov exponents),
``scenario`` and ``cli`` (declarative runs and the ``kfield`` command).
"""
__version__ = "0.1.0"

from .errors import (DomainError, KFieldError, MismatchError, NonConvergedWarning,  # noqa: E402
                     NonFiniteError, ParseError, SchemaError, SingularTorsionError,
                     StabilityError, StepError, SuperluminalError)
from .geometry import KMetricField, assemble_connection, constant_metric  # noqa: E402
from .potentials import Particle, make_potential  # noqa: E402
from .dynamics import State, integrate_newton  # noqa: E402

__all__ = [
    "DomainError", "KFieldError", "MismatchError", "NonConvergedWarning", "NonFiniteError",
    "ParseError", "SchemaError", "SingularTorsionError", "StabilityError", "StepError",
    "SuperluminalError", "KMetricField", "assemble_connection", "constant_metric",
    "Particle", "make_potential", "State", "integrate_newton",
]
