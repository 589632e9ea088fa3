"""Exception hierarchy.

Every error raised by this package derives from GasNetError, so callers can
catch one type at the boundary.  Input problems (bad files, schema holes,
broken references) are distinguished from numerical failures (singular
systems, nonconvergence) because the command line maps them to different
exit codes.
"""


class GasNetError(Exception):
    """Base class for all package errors."""


class MalformedFile(GasNetError):
    """File could not be read or decoded at all."""


class SchemaViolation(GasNetError):
    """File decoded, but required fields are missing or unknown ones present."""


class InvariantViolation(GasNetError):
    """Structurally valid input that breaks a model invariant."""


class NegativePressure(GasNetError):
    """Pressure below zero passed to an equation-of-state conversion."""


class NegativeDensity(GasNetError):
    """Density below zero passed to an equation-of-state conversion."""


class NonpositiveFactor(GasNetError):
    """Multiplicative adjustment factor that is not strictly positive."""


class ScaleMismatch(GasNetError):
    """Scale set inconsistent with the network's gas properties."""


class InfeasibleRefinement(GasNetError):
    """No admissible segment count exists for a pipe at the given spacing."""


class MissingRatio(GasNetError):
    """Compressor present in the network but no ratio series supplied."""


class DimensionMismatch(GasNetError):
    """Array arguments whose shapes do not fit the network or grid."""


class NonConvergence(GasNetError):
    """Iterative solve exhausted its budget without meeting tolerance."""


class SingularJacobian(GasNetError):
    """Newton matrix could not be factorized."""


class SingularKKT(GasNetError):
    """Interior-point KKT system could not be factorized even regularized."""


class InfeasibleBoxes(GasNetError):
    """Variable bounds with empty interior requested from the estimator."""


class InfeasibleDetected(GasNetError):
    """Optimizer concluded the constraint set admits no feasible point."""
