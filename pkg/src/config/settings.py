"""Configuration settings for the sampled-data safety filter"""

from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SDCBF_",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = "INFO"

    # Taylor models
    taylor_order: int = 2

    # Polynomial lower bounding (branch and bound)
    pop_tolerance: float = 1e-6
    pop_node_budget: int = 20000
    pop_batch_size: int = 8
    realtime_budget_fraction: Optional[float] = None

    def pop_time_budget(self, dt: float) -> Optional[float]:
        """Wall-clock budget for one margin computation, None when disabled"""
        if self.realtime_budget_fraction is None:
            return None
        return self.realtime_budget_fraction * dt

    # Reachability
    expm_order: int = 6
    max_generators: int = 64
    seed_inflation: float = 2.0
    max_seed_rounds: int = 5

    # Simulation
    substeps: int = 100
    integration_slack: float = 1e-4

    # CLI
    output_dir: str = "runs"
    workers: int = 1
    default_seed: int = 0


# Global settings instance
settings = Settings()
