"""Exception hierarchy shared across the package."""


class QmscapError(Exception):
    """Base class for all library errors."""


class DimensionMismatch(QmscapError):
    """Operands have incompatible shapes."""


class NotTracePreserving(QmscapError):
    """Kraus family fails the trace-preservation test."""

    def __init__(self, violation: float, tol: float):
        self.violation = violation
        self.tol = tol
        super().__init__(
            f"sum K^dag K deviates from identity by {violation:.3e} (tol {tol:.1e})"
        )


class NotCompletelyPositive(QmscapError):
    """Choi matrix has an eigenvalue below -tol."""


class NonSquareChannel(QmscapError):
    """Operation requires dim_in == dim_out."""


class EigSolverFailure(QmscapError):
    """Underlying eigensolver did not converge."""


class AmbiguousPeriphery(QmscapError):
    """Peripheral/non-peripheral eigenvalue split is too close to call."""


class ProjectorNotCP(QmscapError):
    """Numerical peripheral projector violates complete positivity beyond tol."""


class AlgebraClosureFailure(QmscapError):
    """Candidate algebra is not closed under multiplication within tol."""


class DegenerateSample(QmscapError):
    """Generic-element sampling produced clustered eigenvalues twice in a row."""


class PermutationAmbiguity(QmscapError):
    """Peripheral block dynamics does not concentrate on a single block."""


class ChainNotMonotone(QmscapError):
    """A later operator system fails to contain an earlier one beyond tol."""


class StabilizationMismatch(QmscapError):
    """Stabilized operator system disagrees with the projector's system."""


class NotAlgebra(QmscapError):
    """Operator system is not closed under multiplication."""


class SupportViolation(QmscapError):
    """Support condition of a divergence is violated (normally encoded as +inf)."""


class NumericalNonHermitian(QmscapError):
    """An input that must be Hermitian is not, beyond tolerance."""


class SolverNotConverged(QmscapError):
    """Convex solver failed to reach the requested accuracy."""


class PreconditionViolated(QmscapError):
    """Analytic bound evaluated outside its validity range."""


class UnknownChannel(QmscapError):
    """Zoo name is not recognized."""
