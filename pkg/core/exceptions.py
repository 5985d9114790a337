"""
Exception hierarchy for the recommendation engine.

Every error carries the process exit code the CLI reports for it.
"""


class GMFlowRecError(Exception):
    """Base class for all engine errors."""

    exit_code: int = 1


# Config / usage (exit code 2)

class ConfigError(GMFlowRecError, ValueError):
    """Invalid run or synthesis configuration."""

    exit_code = 2


class CheckpointError(GMFlowRecError, ValueError):
    """Checkpoint file unreadable or incompatible with the config."""

    exit_code = 2


# Data (exit code 3)

class IoError(GMFlowRecError, OSError):
    """Input file missing or unreadable."""

    exit_code = 3


class FormatError(GMFlowRecError, ValueError):
    """Too many malformed rows, or inconsistent item/domain assignment."""

    exit_code = 3


class EmptyDatasetError(GMFlowRecError, ValueError):
    exit_code = 3


class InsufficientCandidatesError(GMFlowRecError, ValueError):
    """A domain holds too few items to draw the requested negatives."""

    exit_code = 3


class EmptyDomainError(GMFlowRecError, ValueError):
    exit_code = 3


class DomainMismatchError(GMFlowRecError, ValueError):
    """Target item does not belong to the target domain vocabulary."""

    exit_code = 3


class EmptyEvalError(GMFlowRecError, ValueError):
    exit_code = 3


# Numerics (exit code 4)

class NumericsError(GMFlowRecError, ArithmeticError):
    """Non-finite values produced by a forward computation."""

    exit_code = 4


class ShapeError(GMFlowRecError, ValueError):
    """Operand shapes violate an operation's contract."""

    exit_code = 4


class DomainError(GMFlowRecError, ValueError):
    """Scalar argument outside its mathematical domain (e.g. t not in [0, 1])."""

    exit_code = 4
