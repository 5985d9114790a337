"""
Process-level settings for the GMFlowRec engine.

Run hyperparameters live in run_config.RunConfig; this module only holds
knobs that belong to the process (log level, progress bars, output
location, default worker threads).
"""
import os
import sys

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="GMFR_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO")
    progress: bool = Field(default=True)

    # Paths
    base_dir: str = Field(default=os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
    default_out_dir: str = Field(default="")

    # Parallelism; default for RunConfig.threads
    threads: int = Field(default=1, ge=1)

    def __init__(self, **kwargs):
        super().__init__(**kwargs)
        # Set default paths after base_dir is resolved
        if not self.default_out_dir:
            self.default_out_dir = os.path.join(self.base_dir, "runs")

    def show_progress(self) -> bool:
        """Progress bars only when enabled and stderr is a terminal."""
        return self.progress and sys.stderr.isatty()


# Global settings instance
settings = Settings()
