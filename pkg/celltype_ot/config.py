"""
Centralised config for the entire application.

This module consolidates the numerical defaults (KL weight, entropic scale,
smoothing, peak detection) and the filesystem layout, loading overrides from
environment variables or a `.env` file and exposing them through a singleton
`settings` object.
"""

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Centralized application settings.

    Pydantic's BaseSettings will automatically load values from a `.env` file
    or from system environment variables, so a sensitivity study can move a
    default (e.g. `UOT_LAMBDA=10`) without touching the code.
    """
    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore", case_sensitive=False)

    # --- CORE SETTINGS ---
    PROJECT_ROOT: Path = Path(__file__).parent.parent.resolve()

    # --- TRANSPORT SOLVER ---
    UOT_LAMBDA: float = 1.0  # KL weight on the relaxed row marginal
    UOT_EPSILON_SCALE: float = 1e-3  # epsilon = scale * max cost
    SOLVER_MAX_ITERS: int = 10000
    SOLVER_TOL: float = 1e-10  # sup-norm on successive log scalings

    # --- MARGINALS ---
    SMOOTHING_DELTA: float = 1e-6
    ZERO_MASS_TOL: float = 1e-15

    # --- PEAK DETECTION ---
    PEAK_WINDOW: int = 2
    PEAK_THRESHOLD_K: float = 3.0
    PEAK_THRESHOLD_SCALE: str = "log"  # median + k * MAD taken of log W ("linear": of W)
    MAD_SCALE: float = 1.4826

    # --- MONTE CARLO ---
    THREADS: int = 1
    BENCH_RUNS: int = 50
    SIM_SEED: int = 0

    # --- FILE PATHS (derived from PROJECT_ROOT) ---
    @property
    def log_path(self) -> Path:
        return self.PROJECT_ROOT / "output/logs/celltype_ot.log"

    @property
    def output_dir(self) -> Path:
        return self.PROJECT_ROOT / "output"


# Create a single, importable instance of the settings
settings = Settings()
