# asymptotica/utils/errors.py

from typing import Any, Dict, Optional


class DimensionError(ValueError):
    """Operand shapes do not fit together."""


class ValidationError(ValueError):
    """An input violates a documented precondition."""


class ChannelFileError(ValueError):
    """A channel or unfold-spec file could not be parsed."""


class NotAnEigenvalueError(ValueError):
    """Requested eigenvalue is not in the spectrum."""


class DomainError(ValueError):
    """Operand lies outside the domain of the operation."""


class NumericalError(RuntimeError):
    """A numerical kernel failed to converge."""

    def __init__(self, message: str, residual: Optional[float] = None):
        super().__init__(message)
        self.residual = residual


class StructuralError(RuntimeError):
    """A structural invariant of the asymptotic theory was violated.

    `invariant` names the failing identity, `margin` is the measured defect.
    """

    def __init__(
        self,
        message: str,
        invariant: str = "structure",
        margin: Optional[float] = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        super().__init__(message)
        self.invariant = invariant
        self.margin = margin
        self.details = details or {}


class DefectivenessError(StructuralError):
    pass


class NotAnAlgebraError(StructuralError):
    pass


class DecompositionError(StructuralError):
    pass


class PermutationExtractionError(StructuralError):
    pass


class FaithfulnessError(StructuralError):
    pass


class DerivationViolationError(StructuralError):
    pass


class ConsistencyError(StructuralError):
    pass


class SynthesisError(StructuralError):
    pass
