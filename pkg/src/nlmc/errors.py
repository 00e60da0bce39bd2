"""Exception types raised across the package."""


class NlmcError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(NlmcError):
    """Invalid perforated-domain description."""


class PerforationTooSmall(GeometryError):
    """A perforation removes fewer than the minimum number of fine cells."""


class PerforationOverlap(GeometryError):
    """Perforations overlap or violate the clearance requirement at the
    requested fine resolution."""


class NonNestedGrids(NlmcError):
    """Fine grid spacing does not divide the coarse block size."""


class DegenerateTriangle(NlmcError):
    """A triangle with non-positive area was encountered during assembly."""


class SolverError(NlmcError):
    """Base class for linear-solver failures."""


class NotConverged(SolverError):
    def __init__(self, residual, max_iters=None):
        self.residual = residual
        self.max_iters = max_iters
        super().__init__(f"solver did not reach tolerance (residual={residual:.3e})")


class SingularSystem(SolverError):
    """The system matrix is singular or numerically rank deficient."""


class InvalidContinuum(NlmcError):
    """Requested continuum index does not exist for the target block."""


class RankDeficientConstraints(NlmcError):
    """Constraint rows of a local basis problem are linearly dependent."""


class SaddleSolveFailure(SolverError):
    def __init__(self, residual, detail=""):
        self.residual = residual
        super().__init__(
            f"saddle-point solve failed (constraint residual={residual:.3e}) {detail}"
        )


class DimensionMismatch(NlmcError):
    """Operands have incompatible shapes."""


class ZeroReference(NlmcError):
    """Relative error requested against a reference with zero norm."""


class EmptyBlock(NlmcError):
    """A coarse block without fine triangles was queried."""


class ConfigError(NlmcError):
    """Malformed geometry or scenario configuration file."""
