"""Exception hierarchy for graspforge"""


class GraspForgeError(Exception):
    """Base class for every error raised by graspforge"""


class ConfigError(GraspForgeError):
    """Invalid run configuration; `key` names the offending dotted key"""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class PlacementError(GraspForgeError):
    """No non-overlapping pose found within the rejection budget"""


class UnknownObjectError(GraspForgeError, KeyError):
    """Object id not present in the scene"""


class EmptyWorkspaceError(GraspForgeError):
    """Occupancy raster has no occupied pixel"""


class CenterOutsideImageError(GraspForgeError):
    """Grasp center falls outside the rendered image"""


class ShapeMismatchError(GraspForgeError, ValueError):
    """Array shape does not match the configured size"""


class BinOutOfRangeError(GraspForgeError, IndexError):
    """Angle bin index outside [0, 18)"""


class NonFiniteGradientError(GraspForgeError, FloatingPointError):
    """A gradient contained NaN or infinity"""


class DivergenceError(GraspForgeError, FloatingPointError):
    """Training loss became non-finite"""


class DisjointnessError(GraspForgeError):
    """Held-out shapes overlap the training library"""


class InsufficientPositivesError(GraspForgeError):
    """Cannot balance a test set without examples of both classes"""


class CheckpointFormatError(GraspForgeError):
    """Checkpoint file is malformed or of the wrong kind"""


class RunDirectoryError(GraspForgeError):
    """Run directory is not empty and --force was not given"""


class ArtifactNotFoundError(GraspForgeError):
    """A subcommand needs an artifact no run directory provides"""
