"""Exception types shared across the package.

Every recoverable failure raises one of these so callers (and the CLI) can
map problems to exit codes without string matching.
"""


class EgoPoseError(Exception):
    """Base class for all package errors."""


# skeleton
class DegeneratePose(EgoPoseError):
    """Shoulders coincide or the shoulder line is parallel to up."""


class FrameMismatch(EgoPoseError):
    """Operation requires both poses in the same (wearer-local) frame."""


# geometry
class InsufficientPoints(EgoPoseError):
    """Fewer than 4 correspondences."""


class DegenerateConfiguration(EgoPoseError):
    """Correspondences do not determine a homography (rank-deficient system)."""


class NormalizationFailure(EgoPoseError):
    """Top-left entry too small to normalize to 1."""


class SingularMatrix(EgoPoseError):
    """Matrix inversion or determinant-scaling impossible."""


class OutOfRange(EgoPoseError):
    """Window does not fit inside the available frames."""


# clustering
class TooFewPoses(EgoPoseError):
    """Fewer poses than requested clusters."""


# classify
class DegenerateLabels(EgoPoseError):
    """Training set has a single class."""


class DimMismatch(EgoPoseError):
    """Feature dimensionality inconsistent with the model or training set."""


class EmptyModel(EgoPoseError):
    """Query against a model with no training points."""


class LengthMismatch(EgoPoseError):
    """Per-frame input length disagrees with the frame count."""


# pathopt
class Infeasible(EgoPoseError):
    """No finite-energy path through the trellis."""


class StateExplosion(EgoPoseError):
    """Exact solver state space exceeds its budget."""


class TooLarge(EgoPoseError):
    """Brute-force enumeration exceeds its budget."""


class InfeasiblePath(EgoPoseError):
    """A supplied path uses a transition between non-neighbor clusters."""


# evaluation
class EmptyLabel(EgoPoseError):
    """No training pose carries the requested sit/stand label."""


# synth
class ScriptError(EgoPoseError):
    """Motion script violates the sit/stand transition rules."""
