"""Validated options of one CLI invocation."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from celltype_ot.config import settings
from celltype_ot.core.changepoint import ThresholdScale
from celltype_ot.core.embedding import Reducer
from celltype_ot.core.simulation import SimConfig, SineReading
from celltype_ot.core.uot_solver import SolverConfig
from celltype_ot.errors import ConfigurationError

Command = Literal["analyze", "simulate", "bench", "eval"]


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    command: Command
    input: Optional[Path] = None
    out: Optional[Path] = None
    truth: Optional[Path] = None
    detected: Optional[Path] = None

    # solver and detection
    lambda_: float = Field(default_factory=lambda: settings.UOT_LAMBDA, gt=0, alias="lambda")
    epsilon: Optional[float] = Field(default=None, gt=0)
    epsilon_scale: float = Field(default_factory=lambda: settings.UOT_EPSILON_SCALE, gt=0)
    max_iters: int = Field(default_factory=lambda: settings.SOLVER_MAX_ITERS, ge=1)
    convergence_tol: float = Field(default_factory=lambda: settings.SOLVER_TOL, gt=0)
    delta: float = Field(default_factory=lambda: settings.SMOOTHING_DELTA, gt=0)
    window: int = Field(default_factory=lambda: settings.PEAK_WINDOW, ge=1)
    threshold_k: float = Field(default_factory=lambda: settings.PEAK_THRESHOLD_K, gt=0)
    threshold_scale: ThresholdScale = Field(default_factory=lambda: settings.PEAK_THRESHOLD_SCALE)
    reducer: Optional[Reducer] = None
    threads: int = Field(default_factory=lambda: settings.THREADS, ge=1)

    # simulation
    d: int = Field(default=10, ge=2)
    t: int = Field(default=50, ge=2)
    g: int = Field(default=50, ge=1)
    n: int = Field(default=2000, ge=1)
    nu: float = Field(default=0.1, ge=0)
    eta: float = Field(default=1.0, ge=0)
    changes: tuple[int, ...] = (10, 20, 30, 40)
    seed: int = Field(default_factory=lambda: settings.SIM_SEED)
    sine_reading: SineReading = "inner_pi"
    runs: int = Field(default_factory=lambda: settings.BENCH_RUNS, ge=1)
    sweep: bool = False

    @classmethod
    def build(cls, **options) -> "RunConfig":
        """Validate CLI options; unset (None) options keep their defaults."""
        try:
            return cls(**{k: v for k, v in options.items() if v is not None})
        except ValidationError as exc:
            raise ConfigurationError(f"invalid options: {exc}") from exc

    def solver_config(self) -> SolverConfig:
        try:
            return SolverConfig(
                lambda_=self.lambda_, epsilon=self.epsilon, epsilon_scale=self.epsilon_scale,
                max_iters=self.max_iters, convergence_tol=self.convergence_tol,
            )
        except ValidationError as exc:
            raise ConfigurationError(f"invalid solver options: {exc}") from exc

    def sim_config(self) -> SimConfig:
        return SimConfig.build(
            d=self.d, T=self.t, G=self.g, n=self.n, nu=self.nu, eta=self.eta,
            change_times=self.changes, seed=self.seed, sine_reading=self.sine_reading,
            reducer=self.reducer or "principal_axes",
        )
