"""Exceptions raised by the PPO-AMBER engine."""


class AmberError(Exception):
    """Base class for engine errors."""


class DimensionMismatchError(AmberError, ValueError):
    """An array does not have the shape the receiving operation expects."""


class NonFiniteError(AmberError, FloatingPointError):
    """A loss, gradient or parameter became NaN or infinite."""


class ReplayOrderError(AmberError, ValueError):
    """A batch was pushed to the replay memory out of iteration order."""


class DegenerateRangeError(AmberError, ValueError):
    """A score range has no width, so it cannot normalize anything."""


class TrainingAborted(AmberError, RuntimeError):
    """Training stopped because an update could not be applied."""


class ConfigFileError(AmberError, ValueError):
    """A config file or command-line override cannot be turned into a config."""
