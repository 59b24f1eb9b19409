"""Process-level settings via environment variables.

Settings are loaded from environment variables (or a .env file) using
Pydantic BaseSettings. They cover the ambient concerns of a run (logging,
output location, metrics, sweep parallelism); the numerical configuration
of a run lives in the TOML run file (see src.models.config.RunConfig).
"""

from __future__ import annotations

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Central ambient configuration for the continuation toolkit."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
    )

    # --- Output ---
    output_dir: Path = Path("runs")
    metrics_enabled: bool = True

    # --- Sweeps ---
    sweep_workers: int = Field(default=1, ge=1)

    # --- Logging ---
    log_level: str = "INFO"
    log_format: str = "console"
