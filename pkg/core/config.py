"""Laboratory configuration management."""

from pathlib import Path
from typing import Any

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from core.constants import LogLevel


class Settings(BaseSettings):
    """Process-wide settings, read from the environment and an optional .env file."""

    # Application
    app_name: str = Field(default="LSV Lab", description="Laboratory name")
    version: str = Field(default="0.1.0", description="Laboratory version")
    log_level: LogLevel = Field(
        default=LogLevel.INFO, description="Root log level", alias="LSVLAB_LOG_LEVEL"
    )

    # Concurrency
    threads: int = Field(
        default=1,
        ge=1,
        description="Worker threads for Monte Carlo blocks",
        alias="LSVLAB_THREADS",
    )
    mc_block_size: int = Field(
        default=50_000, ge=1, description="Samples per seeded Monte Carlo block"
    )

    # Density grid
    grid_size: int = Field(
        default=32768, ge=1024, description="Total number of grid cells"
    )
    grid_geometric_cells: int = Field(
        default=600, ge=10, description="Geometric cells resolving the singularity at 0"
    )
    grid_min_edge: float = Field(
        default=1e-12, gt=0.0, description="First nonzero grid edge"
    )
    grid_geometric_top: float = Field(
        default=0.1, gt=0.0, lt=0.5, description="Where geometric cells end"
    )

    # Renewal dynamic program
    dp_state_budget: int = Field(
        default=50_000_000,
        ge=1,
        description="Maximum n_max * value_cap for the exact tail program",
    )

    # Output
    output_dir: Path = Field(
        default=Path("results"),
        description="Default output directory",
        alias="LSVLAB_OUTPUT_DIR",
    )
    csv_significant_digits: int = Field(
        default=17, ge=1, le=17, description="Significant digits for reals in CSV"
    )

    model_config = SettingsConfigDict(
        env_prefix="LSVLAB_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        populate_by_name=True,
    )

    def __init__(self, **kwargs: Any) -> None:
        """Initialize settings and keep the geometric region inside the grid budget."""
        super().__init__(**kwargs)

        if self.grid_geometric_cells >= self.grid_size // 2:
            self.grid_geometric_cells = self.grid_size // 4


# Global settings instance
settings = Settings()
