from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    model_config = SettingsConfigDict(
        env_prefix="NONCONV_",
        env_file=".env",
        extra="ignore",
    )

    # -----------------------------
    # Run Control
    # -----------------------------
    SEED: Optional[int] = None          # NONCONV_SEED overrides the config seed
    THREADS: int = 1
    LOG_LEVEL: str = "INFO"
    LOG_FILE: Optional[str] = None

    # -----------------------------
    # Exact Computation Limits
    # -----------------------------
    TUPLE_SPACE_LIMIT: int = 10**8
    ALPHA_MAX_STATES: int = 20
    TAIL_TOLERANCE: float = 1e-10

    # -----------------------------
    # Monte Carlo Integration
    # -----------------------------
    MC_SAMPLES: int = 10**5
    MC_SEED: int = 20240601

    # -----------------------------
    # Statistical Thresholds
    # -----------------------------
    SE_MULTIPLIER: float = 3.0
    RELATIVE_TOLERANCE: float = 0.05
    ASCLT_MIN_N: int = 10**4
    CALIBRATION_LANES: int = 100
    CALIBRATION_QUANTILE: float = 0.95
    THRESHOLD_MARGIN: float = 0.25
    LIL_N_START: int = 3
    LIL_PASS_FRACTION: float = 0.9
    GRID_STEP: float = 1e-3

    # -----------------------------
    # Log-Averaged Suites
    # -----------------------------
    ASCLT_PATHS: int = 100
    ASCLT_START: int = 10
    ASCLT_GRID_POINTS: int = 4001
    ASCLT_KS_LIMIT: float = 0.10
    ARCSINE_KS_LIMIT: float = 0.15
    SANITY_KS_LIMIT: float = 0.08
    ARCSINE_SANITY_KS_LIMIT: float = 0.12


# Instantiate once so it can be imported package-wide
settings = Settings()


def get_settings() -> Settings:
    """Fresh settings, re-reading the environment (used by the CLI per run)."""
    return Settings()
