"""
Application configuration: tolerances, solver limits and experiment schedules.
"""
from pathlib import Path
from typing import List, Optional, Tuple, Type, Union

from pydantic_settings import (
    BaseSettings,
    PydanticBaseSettingsSource,
    SettingsConfigDict,
    TomlConfigSettingsSource,
)

from app.core.errors import ConfigError


class Settings(BaseSettings):
    PROJECT_NAME: str = "landslide-flow"
    VERSION: str = "0.1.0"
    LOG_LEVEL: str = "INFO"

    # Runtime
    LANDSLIDE_THREADS: int = 0  # 0 keeps the library default
    SEED: int = 0
    SAMPLES: int = 100

    # Pointwise tolerances
    IDENTITY_TOL: float = 1e-12
    GAUSS_TOL: float = 1e-14
    FD_STEP: float = 1e-4
    FD_TOL: float = 1e-6
    FD_HALVING_RATIO: float = 3.5
    THETA_GRID_SIZE: int = 64
    KAPPA_MAX: float = 3.0

    # Complex extension
    CR_GRID_SIZE: int = 20
    CR_RADIUS: float = 0.9
    CR_TOL: float = 1e-6
    SINGULAR_PROBE_SAMPLES: int = 1000

    # Mesh and solvers
    SUBDIVISION_LEVEL: int = 3
    GAUSS_BONNET_TOL: float = 1e-6
    REFINEMENT_FACTOR: float = 1.8
    SOLVER_GRADIENT_TOL: float = 1e-8
    SOLVER_MAX_ITERATIONS: int = 100000
    SOLVER_MAX_RESTARTS: int = 5
    SOLVER_NEWTON_STEPS: int = 50
    CENTER_MAX_ITERATIONS: int = 60
    CENTER_TOL: float = 1e-3
    IDENTITY_B_TOL: float = 1e-6
    DET_TOL: float = 1e-3
    AREA_TOL: float = 1e-3
    DUAL_SOLVER_TOL: float = 0.05
    TARGET_TWIST_FRACTION: float = 0.05

    # Holonomy
    FN_LENGTHS: List[float] = [1.0, 1.0, 1.0]
    FN_TWISTS: List[float] = [0.0, 0.0, 0.0]
    PINCH_CURVE: int = 1
    PINCH_LENGTHS: List[float] = [1.0, 0.5, 0.25, 0.125]
    REFERENCE_CURVE: str = "b"
    TEST_CURVES: List[str] = ["b", "ab", "d"]
    SPECTRUM_MAX_WORD_LENGTH: int = 6
    PROJECTIVE_VARIATION_TOL: float = 0.02
    LIMIT_LEVEL: int = 1
    LIMIT_TEST_LETTERS: List[str] = ["b", "c", "d"]
    LIMIT_TWIST_SIGN: float = 1.0

    # Degeneration schedules
    SCHEDULE_LENGTHS: List[float] = [1.0, 1.0]
    SCHEDULE_A: List[float] = [1.0, 1.0]
    SCHEDULE_B: List[float] = [1.0, 1.0]
    T_GRID: List[float] = [1e2, 1e4, 1e6, 1e8]
    C1: float = 10.0
    COUNTEREXAMPLE_A: List[float] = [2.0, 1.0]
    COUNTEREXAMPLE_B: List[float] = [1.0, 0.5]
    TRL_TOL_1E4: float = 0.12
    TRL_TOL_1E8: float = 0.06

    model_config = SettingsConfigDict(case_sensitive=True, env_file=".env", extra="ignore")

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
            env_settings,
            dotenv_settings,
            TomlConfigSettingsSource(settings_cls),
            file_secret_settings,
        )

    @property
    def thread_limit(self) -> Optional[int]:
        """Thread cap for inner parallelism, None for the library default."""
        return self.LANDSLIDE_THREADS if self.LANDSLIDE_THREADS > 0 else None


def load_settings(config_path: Optional[Union[str, Path]] = None, **overrides) -> Settings:
    """Build settings from an optional TOML file, the environment and explicit overrides."""
    settings_cls: Type[Settings] = Settings
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        settings_cls = type(
            "FileSettings",
            (Settings,),
            {"model_config": SettingsConfigDict(**{**Settings.model_config, "toml_file": path})},
        )
    try:
        return settings_cls(**overrides)
    except ValueError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc


settings = Settings()
