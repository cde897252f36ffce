"""Exception taxonomy shared across the toolkit.

The CLI maps these onto distinct exit codes; library code raises them directly.
"""


class ModAdvError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(ModAdvError):
    """Invalid or inconsistent configuration (unknown keys, bad preset, ...)."""


class ArgumentError(ModAdvError):
    """A function argument violates its precondition."""


class ShapeError(ModAdvError):
    """Array shape or architecture incompatibility."""


class NumericalError(ModAdvError):
    """NaN/Inf encountered where finite values are required."""


class TrainingError(NumericalError):
    """Training diverged; carries the epoch index."""

    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class UnsupportedAttackError(ModAdvError):
    """Attack requested against a model that exposes no input gradient."""
