"""
Run configuration for training, evaluation and synthesis.

A run is described by one JSON file. CLI flags are deep-merged on top of
the file before validation, so precedence is flags > file > environment
> defaults.
"""
import hashlib
import json
import os
import sys
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
from config.settings import settings
from core.exceptions import ConfigError


# Fields that do not change results and so stay out of the config hash
_HASH_EXCLUDE = {"threads", "out_dir"}


class SynthConfig(BaseModel):
    """Synthetic multi-domain user simulator."""

    num_domains: int = Field(default=3, ge=1)
    items_per_domain: int = Field(default=50, ge=1)
    num_users: int = Field(default=2000, ge=1)
    min_len: int = Field(default=12, ge=1)
    max_len: int = Field(default=30, ge=1)

    # Either an explicit D x D matrix or the off-diagonal mass of a uniform one
    transition: Optional[List[List[float]]] = None
    off_diagonal_mass: float = Field(default=0.3, ge=0.0, le=1.0)

    # Scalar or one exponent per domain
    zipf_exponent: float | List[float] = 1.0
    intent_dim: int = Field(default=8, ge=1)
    intent_weight: float = Field(default=0.8, ge=0.0, le=1.0)
    intent_temperature: float = Field(default=0.5, gt=0.0)
    intent_drift: float = Field(default=0.05, ge=0.0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_lengths(self) -> "SynthConfig":
        if self.min_len > self.max_len:
            raise ValueError("min_len must not exceed max_len")
        if isinstance(self.zipf_exponent, list) and len(self.zipf_exponent) != self.num_domains:
            raise ValueError("zipf_exponent list must have one entry per domain")
        return self

    def transition_matrix(self) -> np.ndarray:
        """
        Resolve and validate the domain transition matrix.

        Raises:
            ConfigError: shape is not D x D, an entry is negative, or a row
                does not sum to 1 within 1e-9
        """
        D = self.num_domains
        if self.transition is None:
            if D == 1:
                return np.ones((1, 1))
            off = self.off_diagonal_mass / (D - 1)
            matrix = np.full((D, D), off)
            np.fill_diagonal(matrix, 1.0 - self.off_diagonal_mass)
            return matrix

        matrix = np.asarray(self.transition, dtype=np.float64)
        if matrix.shape != (D, D):
            raise ConfigError(
                f"synth.transition: expected a {D}x{D} matrix, got shape {matrix.shape}"
            )
        for row_idx, row in enumerate(matrix):
            if np.any(row < 0):
                raise ConfigError(f"synth.transition row {row_idx} has a negative entry")
            if abs(row.sum() - 1.0) > 1e-9:
                raise ConfigError(
                    f"synth.transition row {row_idx} sums to {row.sum():.12g}, expected 1"
                )
        return matrix

    def zipf_exponents(self) -> List[float]:
        if isinstance(self.zipf_exponent, list):
            return list(self.zipf_exponent)
        return [float(self.zipf_exponent)] * self.num_domains


class DataConfig(BaseModel):
    """Dataset paths and preprocessing thresholds."""

    interactions_path: Optional[str] = None
    split_dir: Optional[str] = None
    format: Optional[Literal["csv", "tsv"]] = None
    user_core: int = Field(default=10, ge=1)
    item_core: int = Field(default=15, ge=1)
    max_len: int = Field(default=50, ge=3)
    num_negatives: int = Field(default=999, ge=1)


class EncoderConfig(BaseModel):
    dim: int = Field(default=64, ge=1)
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=2, ge=1)
    dropout: float = Field(default=0.1, ge=0.0, lt=1.0)
    max_len: int = Field(default=50, ge=1)

    @model_validator(mode="after")
    def _check_heads(self) -> "EncoderConfig":
        if self.dim % self.heads != 0:
            raise ValueError(f"dim ({self.dim}) must be divisible by heads ({self.heads})")
        return self


class FlowConfig(BaseModel):
    """Flow matching and GMM head hyperparameters."""

    num_components: int = Field(default=4, ge=1)
    lam: float = Field(default=0.5, ge=0.0, le=1.0)
    steps: int = Field(default=4, ge=1)
    sigma_min: float = Field(default=1e-3, gt=0.0)
    sigma_max: float = Field(default=1e2, gt=0.0)
    time_features: int = Field(default=8, ge=2)
    hidden_mult: int = Field(default=4, ge=1)
    velocity_mode: Literal["derived", "literal"] = "derived"
    # False builds the aligned prior from domain-invariant states (ablation)
    use_ds_prior: bool = True
    # False drops h_DA from the head input and the prior loss (ablation)
    use_aligned_prior: bool = True

    @model_validator(mode="after")
    def _check_sigma(self) -> "FlowConfig":
        if self.sigma_min >= self.sigma_max:
            raise ValueError("sigma_min must be below sigma_max")
        if self.time_features % 2 != 0:
            raise ValueError("time_features must be even (sin/cos pairs)")
        return self


class LossWeights(BaseModel):
    alpha: float = Field(default=0.1, ge=0.0, allow_inf_nan=False)
    beta: float = Field(default=0.01, ge=0.0, allow_inf_nan=False)


class TrainConfig(BaseModel):
    lr: float = Field(default=1e-4, gt=0.0)
    batch_size: int = Field(default=256, ge=1)
    max_epochs: int = Field(default=100, ge=0)
    patience: int = Field(default=10, ge=1)
    adam_beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    adam_beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    adam_eps: float = Field(default=1e-8, gt=0.0)

    alpha_grid: List[float] = [0.0, 0.1, 0.5, 1.0]
    beta_grid: List[float] = [0.0, 1e-5, 1e-4, 1e-2, 0.1, 1.0]
    k_grid: List[int] = [2, 4, 6, 8, 16, 32]


class GroupConfig(BaseModel):
    """Bucket boundaries for the grouping analyses."""

    transition_low: float = Field(default=1.0 / 3.0, ge=0.0, le=1.0)
    transition_high: float = Field(default=2.0 / 3.0, ge=0.0, le=1.0)
    few_shot_threshold: int = Field(default=5, ge=1)

    @model_validator(mode="after")
    def _check_order(self) -> "GroupConfig":
        if self.transition_low > self.transition_high:
            raise ValueError("transition_low must not exceed transition_high")
        return self


class RunConfig(BaseSettings):
    """Complete description of one run."""

    model_config = SettingsConfigDict(
        env_prefix="GMFR_RUN_",
        env_nested_delimiter="__",
        extra="forbid",
    )

    data: DataConfig = DataConfig()
    encoder: EncoderConfig = EncoderConfig()
    flow: FlowConfig = FlowConfig()
    loss: LossWeights = LossWeights()
    train: TrainConfig = TrainConfig()
    groups: GroupConfig = GroupConfig()
    synth: Optional[SynthConfig] = None

    seed: int = 0
    threads: int = Field(default_factory=lambda: settings.threads, ge=1)
    out_dir: Optional[str] = None

    @model_validator(mode="after")
    def _check_lengths(self) -> "RunConfig":
        if self.encoder.max_len < self.data.max_len:
            raise ValueError(
                f"encoder.max_len ({self.encoder.max_len}) must cover data.max_len ({self.data.max_len})"
            )
        return self

    @property
    def hash(self) -> str:
        return config_hash(self)


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        elif value is not None:
            merged[key] = value
    return merged


def _format_validation_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "<root>"
        parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def _read_json(path: str) -> Dict[str, Any]:
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e


def load_run_config(
    path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Load a run config file and apply flag overrides.

    Args:
        path: JSON config file (optional; defaults apply when omitted)
        overrides: Nested dict of flag values; None entries are ignored

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: unreadable file or field-level validation failure
    """
    raw = _read_json(path) if path else {}
    merged = _deep_merge(raw, overrides or {})
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def with_overrides(cfg: RunConfig, overrides: Dict[str, Any]) -> RunConfig:
    """A validated copy of cfg with nested overrides applied."""
    merged = _deep_merge(cfg.model_dump(mode="json"), overrides)
    try:
        return RunConfig(**merged)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e


def load_synth_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> SynthConfig:
    """Load a synthesis config; accepts either a bare SynthConfig or a run config with a `synth` section."""
    raw = _read_json(path)
    if "synth" in raw and isinstance(raw["synth"], dict):
        raw = raw["synth"]
    merged = _deep_merge(raw, overrides or {})
    try:
        cfg = SynthConfig(**merged)
    except ValidationError as e:
        raise ConfigError(_format_validation_error(e)) from e
    cfg.transition_matrix()
    return cfg


def config_hash(cfg: BaseModel) -> str:
    """Short SHA-256 of the canonical config JSON (result-neutral fields excluded)."""
    payload = cfg.model_dump(mode="json", exclude=_HASH_EXCLUDE)
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
