"""Exception hierarchy shared across the package.

Two families matter to callers.  ``UsageError`` and its subclasses flag
bad inputs (malformed configs, mismatched shapes, broken archives) and
map to exit code 3 in the command line tool.  ``SolverFailure`` and its
subclasses flag numerical breakdown during a solve and map to exit
code 2.
"""


class UsageError(Exception):
    """Caller handed us something malformed."""


class ConfigError(UsageError):
    """Unparseable or inconsistent run configuration."""


class MeshGenerationFailure(UsageError):
    """Requested mesh resolution cannot be honoured."""


class ShapeMismatch(UsageError):
    """Array argument has the wrong shape for the requested operation."""


class DimensionMismatch(UsageError):
    """Reduced quantities disagree about basis or interpolation sizes."""


class EmptySnapshotSet(UsageError):
    """A reduction step received no snapshots to work with."""


class ZeroTrainingSet(UsageError):
    """All training vectors are identically zero."""


class FormatVersionMismatch(UsageError):
    """Archive on disk was written by an incompatible format version."""


class ChecksumMismatch(UsageError):
    """Archive payload does not match its recorded digest."""


class SolverFailure(Exception):
    """Numerical breakdown inside a solve."""


class DegenerateMapping(SolverFailure):
    """Mesh deformation lost injectivity (non-positive Jacobian)."""


class SingularSystem(SolverFailure):
    """Full-order linear system could not be solved to tolerance."""


class SingularReducedSystem(SolverFailure):
    """Reduced linear system is singular or ill-conditioned."""


class NonFiniteTheta(SolverFailure):
    """Interpolated coefficient weights came out NaN or infinite."""
