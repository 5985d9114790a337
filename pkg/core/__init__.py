# Submodules (encoder, gmflow, model, pipeline) import the autodiff package,
# which itself imports core.exceptions; keep this module import-light.
from .exceptions import (
    GMFlowRecError,
    ConfigError,
    CheckpointError,
    IoError,
    FormatError,
    EmptyDatasetError,
    InsufficientCandidatesError,
    EmptyDomainError,
    DomainMismatchError,
    EmptyEvalError,
    NumericsError,
    ShapeError,
    DomainError,
)

__all__ = [
    "GMFlowRecError",
    "ConfigError",
    "CheckpointError",
    "IoError",
    "FormatError",
    "EmptyDatasetError",
    "InsufficientCandidatesError",
    "EmptyDomainError",
    "DomainMismatchError",
    "EmptyEvalError",
    "NumericsError",
    "ShapeError",
    "DomainError",
]
