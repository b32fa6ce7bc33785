"""Exception hierarchy shared across the library.

Exit-code mapping used by the CLI: parameter/domain/construction errors
are user errors (exit 1); numerical failures such as divergence or an
exceeded exclusion budget are runtime errors (exit 2).
"""

from __future__ import annotations


class VolterraLabError(Exception):
    """Base class for all library errors."""


class ParameterError(VolterraLabError, ValueError):
    """A parameter is outside its admissible range."""


class DomainError(VolterraLabError, ValueError):
    """An evaluation point is outside the operation's domain."""


class ConstructionError(VolterraLabError, ValueError):
    """A derived object cannot be built from the given parameters."""


class NumericalError(VolterraLabError, RuntimeError):
    """A computation failed numerically (divergence, non-convergence)."""


class DivergenceError(NumericalError):
    """A simulated path left the finite range.

    Carries enough context to reproduce the failure: the seed of the
    offending path and the first step at which a non-finite value appeared.
    """

    def __init__(self, message: str, *, path_seed: int | None = None,
                 step: int | None = None):
        super().__init__(message)
        self.path_seed = path_seed
        self.step = step


class DegeneratePathError(NumericalError):
    """An estimator received a path with no usable variation."""
