"""Configuration settings for the Wiener Heat Lab."""

from typing import Any, Dict, FrozenSet, List, Tuple, Type

from pydantic import Field
from pydantic.fields import FieldInfo
from pydantic_settings import BaseSettings, PydanticBaseSettingsSource, SettingsConfigDict

# Only execution and logging knobs are read from WIENERLAB_* variables and .env;
# numerical defaults change through experiment configs or CLI flags.
ENVIRONMENT_FIELDS: FrozenSet[str] = frozenset({"threads", "log_level", "log_format"})


class EnvironmentAllowList(PydanticBaseSettingsSource):
    """Restrict an environment-backed source to ENVIRONMENT_FIELDS."""

    def __init__(self, settings_cls: Type[BaseSettings], source: PydanticBaseSettingsSource):
        super().__init__(settings_cls)
        self.source = source

    def get_field_value(self, field: FieldInfo, field_name: str) -> Tuple[Any, str, bool]:
        return None, field_name, False

    def __call__(self) -> Dict[str, Any]:
        return {name: value for name, value in self.source().items() if name in ENVIRONMENT_FIELDS}


class Settings(BaseSettings):
    """Lab settings."""

    # Model defaults
    ambient_dim: int = 32
    variance: float = 1.0
    eps_ratio: float = 0.5
    lambda_ratio: float = 0.5
    t_grid: List[float] = Field(default_factory=lambda: [0.01, 0.02, 0.05, 0.1, 0.2])

    # Monte Carlo
    mc_samples: int = 100_000
    mc_max_samples: int = 1_000_000
    mc_shard_size: int = 65_536
    sigma_gate: float = 3.0
    stderr_target_fraction: float = 0.05

    # Quadrature
    quad_order: int = 40
    quad_max_order: int = 512
    quad_grid_budget: int = 10_000_000
    gram_condition_limit: float = 1e12

    # Tolerances
    construction_tolerance: float = 1e-12
    roundtrip_tolerance: float = 1e-10

    # Execution
    threads: int = 1
    output_dir: str = "results"

    # Logging
    log_level: str = "INFO"
    log_format: str = "console"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="WIENERLAB_",
        case_sensitive=False,
    )

    @classmethod
    def settings_customise_sources(
        cls,
        settings_cls: Type[BaseSettings],
        init_settings: PydanticBaseSettingsSource,
        env_settings: PydanticBaseSettingsSource,
        dotenv_settings: PydanticBaseSettingsSource,
        file_secret_settings: PydanticBaseSettingsSource,
    ) -> Tuple[PydanticBaseSettingsSource, ...]:
        return (
            init_settings,
            EnvironmentAllowList(settings_cls, env_settings),
            EnvironmentAllowList(settings_cls, dotenv_settings),
        )


# Global settings instance
settings = Settings()
