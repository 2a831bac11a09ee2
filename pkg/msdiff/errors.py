"""Exceptions raised by msdiff.

Every failure the library can diagnose is a subclass of :class:`MsdiffError`.
The CLI turns them into ``ERROR {...}`` lines and exit codes.
"""

from typing import Any


class MsdiffError(Exception):
    def __init__(self, message: str, **details: Any) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    @property
    def code(self) -> str:
        return type(self).__name__

    def as_dict(self) -> dict[str, Any]:
        return {"error": self.code, "message": self.message, **self.details}


class DimensionMismatch(MsdiffError):
    pass


class InadmissibleComposition(MsdiffError):
    """Composition outside the admissible neighborhood of the simplex."""


class NonInteriorComposition(MsdiffError):
    pass


class SingularSystem(MsdiffError):
    pass


class NotInE(MsdiffError):
    """Vector is not orthogonal to e = (1, ..., 1)."""


class EigenSolverFailure(MsdiffError):
    pass


class NegativeConcentration(MsdiffError):
    pass


class MassNotConserved(MsdiffError):
    pass


class NoEquilibrium(MsdiffError):
    pass


class NewtonDiverged(MsdiffError):
    pass


class NotAnEquilibrium(MsdiffError):
    pass


class StepRejected(MsdiffError):
    def __init__(self, message: str, time: float, **details: Any) -> None:
        super().__init__(message, time=time, **details)
        self.time = time


class NonIntegrableConfig(MsdiffError):
    pass


class SemisimplicityUndecided(MsdiffError):
    pass


class InsufficientDecay(MsdiffError):
    pass


class ConfigError(MsdiffError):
    pass
