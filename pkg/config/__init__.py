from .settings import settings
from .run_config import (
    RunConfig,
    SynthConfig,
    DataConfig,
    EncoderConfig,
    FlowConfig,
    LossWeights,
    TrainConfig,
    GroupConfig,
    load_run_config,
    load_synth_config,
    with_overrides,
    config_hash,
)

__all__ = [
    "settings",
    "RunConfig",
    "SynthConfig",
    "DataConfig",
    "EncoderConfig",
    "FlowConfig",
    "LossWeights",
    "TrainConfig",
    "GroupConfig",
    "load_run_config",
    "load_synth_config",
    "with_overrides",
    "config_hash",
]
