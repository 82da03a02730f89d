"""
Synthetic differentiation benchmark.

Type proportions evolve by per-type growth, with multiplicative "c-vector"
shocks injected at chosen change times. Cells are sampled from each Q_t and
given Gaussian expression profiles whose means are spaced along the all-ones
direction, so the centroid cost is known in closed form.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Literal, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from celltype_ot.config import settings
from celltype_ot.core.changepoint import (
    MIN_SERIES_FOR_PEAKS,
    ThresholdScale,
    detect_peaks,
    score_detection,
    w_series_from_plans,
)
from celltype_ot.core.distributions import GrowthProfile, Marginal, Snapshot, apply_growth, empirical_marginal
from celltype_ot.core.embedding import Reducer, cost_from_centroids, reduce_features, type_centroids
from celltype_ot.core.uot_solver import CostMatrix, SolverConfig, TransportPlan, solve_sequence
from celltype_ot.errors import ConfigurationError
from celltype_ot.infra import log_utils, rng

SineReading = Literal["outer_pi", "inner_pi"]


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    d: int = Field(default=10, ge=2)
    T: int = Field(default=50, ge=2)
    G: int = Field(default=50, ge=1)
    n: int = Field(default=2000, ge=1)
    nu: float = Field(default=0.1, ge=0)
    eta: float = Field(default=1.0, ge=0)
    change_times: tuple[int, ...] = (10, 20, 30, 40)
    seed: int = Field(default_factory=lambda: settings.SIM_SEED)
    sine_reading: SineReading = "inner_pi"
    reducer: Reducer = "principal_axes"

    @field_validator("change_times", mode="before")
    @classmethod
    def _sorted_unique(cls, value):
        return tuple(sorted({int(t) for t in value}))

    @model_validator(mode="after")
    def _changes_in_range(self):
        bad = [t for t in self.change_times if not 0 <= t <= self.T - 1]
        if bad:
            raise ValueError(f"change times {bad} outside [0, {self.T - 1}]")
        return self

    @classmethod
    def build(cls, **options) -> "SimConfig":
        """Validate options, reporting failures as a ConfigurationError."""
        try:
            return cls(**{k: v for k, v in options.items() if v is not None})
        except ValidationError as exc:
            raise ConfigurationError(f"invalid simulation config: {exc}") from exc


@dataclass(frozen=True, eq=False)
class SimTruth:
    marginals: list[Marginal]
    plans: list[TransportPlan]
    cost: CostMatrix
    change_times: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class SimSample:
    """Per-cell draws of one run, stacked over time points in time order."""

    time_index: np.ndarray
    labels: np.ndarray
    features: np.ndarray

    def snapshots(self) -> list[Snapshot]:
        return [Snapshot(int(t), self.labels[self.time_index == t]) for t in np.unique(self.time_index)]


# --- marginal dynamics ------------------------------------------------------------


def growth_rate(t: int, j: int, config: SimConfig) -> float:
    """g_{t,j} for 1-based type j."""
    phase = (t + j - 1) / config.d
    if config.sine_reading == "outer_pi":
        return math.exp(config.nu * math.pi * math.sin(phase))
    return math.exp(config.nu * math.sin(math.pi * phase))


def growth_profile(t: int, config: SimConfig) -> GrowthProfile:
    return GrowthProfile(np.array([growth_rate(t, j, config) for j in range(1, config.d + 1)]))


def change_vectors(config: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Factors exp(eta * s) with s = +1 on the first half of the types and -1 on the second, and its mirror."""
    if config.d % 2:
        raise ConfigurationError(f"change vectors split the types into two halves; d={config.d} is odd")
    half = config.d // 2
    signs = np.concatenate([np.ones(half), -np.ones(half)])
    return np.exp(config.eta * signs), np.exp(-config.eta * signs)


def generate_marginals(config: SimConfig) -> list[Marginal]:
    """Q_0 uniform; Q_{t+1} = g_t(Q_t), times a c-vector when t is a change time.

    Successive changes alternate between the two c-vectors.
    """
    if config.change_times:
        c_first, c_second = change_vectors(config)
        shocks = {t: (c_first if i % 2 == 0 else c_second) for i, t in enumerate(config.change_times)}
    else:
        shocks = {}
    q = Marginal(np.full(config.d, 1.0 / config.d))
    marginals = [q]
    for t in range(config.T):
        q = apply_growth(q, growth_profile(t, config))
        if t in shocks:
            shocked = shocks[t] * q.probs
            q = Marginal(shocked / shocked.sum())
        marginals.append(q)
    return marginals


# --- cells ---------------------------------------------------------------------


def expression_means(config: SimConfig) -> np.ndarray:
    """(d, G) matrix with mu_j = (0.5 (j - d) - 1) * 1_G."""
    j = np.arange(1, config.d + 1)
    return np.repeat((0.5 * (j - config.d) - 1.0)[:, None], config.G, axis=1)


def _generator(seed: Union[int, np.random.Generator], time_index: int = 0) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return rng.stream(int(seed), 0, time_index)


def sample_snapshot(q: Marginal, n: int, seed: Union[int, np.random.Generator], time_index: int = 0) -> Snapshot:
    """n i.i.d. labels from q."""
    gen = _generator(seed, time_index)
    return Snapshot(time_index, gen.choice(q.d, size=n, p=q.probs) + 1)


def sample_expressions(labels: Snapshot, config: SimConfig, seed: Union[int, np.random.Generator]) -> np.ndarray:
    """Row i ~ N_G(mu_{x_i}, I_G), drawn in cell order."""
    gen = _generator(seed, labels.time_index)
    means = expression_means(config)
    return means[labels.labels - 1] + gen.standard_normal((labels.n, config.G))


def build_sim_cost(expressions: np.ndarray, labels: np.ndarray, config: SimConfig) -> CostMatrix:
    """Centroid cost of the reduced expressions, pooled over every time point."""
    reduced = reduce_features(expressions, config.reducer)
    return cost_from_centroids(type_centroids(reduced, labels, config.d))


def true_cost(config: SimConfig) -> CostMatrix:
    """Exact centroid cost: the means are collinear, so both reducers give ||mu_j - mu_k||^2."""
    return cost_from_centroids(expression_means(config))


def simulate_truth(config: SimConfig, solver: Optional[SolverConfig] = None) -> SimTruth:
    """Marginals, true cost and the plans solved on them with the generator's lambda."""
    marginals = generate_marginals(config)
    cost = true_cost(config)
    plans = solve_sequence(marginals, cost, solver or SolverConfig())
    return SimTruth(marginals, plans, cost, config.change_times)


def simulate_dataset(config: SimConfig, run: int = 0, marginals: Optional[Sequence[Marginal]] = None) -> SimSample:
    """Cells for every time point of one run, each time point on its own stream."""
    marginals = marginals if marginals is not None else generate_marginals(config)
    times, labels, features = [], [], []
    for t, q in enumerate(marginals):
        gen = rng.stream(config.seed, run, t)
        snapshot = sample_snapshot(q, config.n, gen, t)
        times.append(np.full(snapshot.n, t))
        labels.append(snapshot.labels)
        features.append(sample_expressions(snapshot, config, gen))
    return SimSample(np.concatenate(times), np.concatenate(labels), np.vstack(features))


# --- Monte Carlo benchmark ---------------------------------------------------------


class Estimate(BaseModel):
    mean: Optional[float]
    se: Optional[float]


class BenchmarkReport(BaseModel):
    """Monte Carlo means and standard errors of plan error and detection quality."""

    schema_version: int = 1
    config: SimConfig
    lambda_: float = Field(alias="lambda")
    threshold_scale: str = "log"
    runs: int
    single_run: bool
    change_error: Estimate
    non_change_error: Estimate
    precision: Estimate
    recall: Estimate
    f_score: Estimate
    clean_run_fraction: float
    detected: list[list[int]]

    model_config = ConfigDict(populate_by_name=True)


@dataclass(frozen=True)
class _RunResult:
    change_error: Optional[float]
    non_change_error: Optional[float]
    detected: tuple[int, ...]
    metrics: Optional[tuple[float, float, float]]


def _estimate(values: list[float]) -> Estimate:
    if not values:
        return Estimate(mean=None, se=None)
    arr = np.asarray(values, dtype=float)
    se = float(arr.std(ddof=1) / math.sqrt(arr.size)) if arr.size > 1 else 0.0
    return Estimate(mean=float(arr.mean()), se=se)


def _one_run(run: int, config: SimConfig, truth: SimTruth, solver: SolverConfig, delta: float,
             window: int, threshold_k: float, threshold_scale: ThresholdScale) -> _RunResult:
    sample = simulate_dataset(config, run, truth.marginals)
    cost = build_sim_cost(sample.features, sample.labels, config)
    marginals = [empirical_marginal(s, config.d) for s in sample.snapshots()]
    plans = solve_sequence(marginals, cost, solver, delta=delta)
    series = w_series_from_plans(plans, cost, solver.lambda_)
    if len(series) >= MIN_SERIES_FOR_PEAKS:
        detected = detect_peaks(series, window, threshold_k, threshold_scale).detected
    else:
        log_utils.log_message(
            f"[bench] run {run}: only {len(series)} W value(s); peak detection needs {MIN_SERIES_FOR_PEAKS}, skipping",
            "WARN",
        )
        detected = ()

    errors = [float(np.sum((est.entries - ref.entries) ** 2)) for est, ref in zip(plans, truth.plans)]
    changes = set(config.change_times)
    at_change = [e for t, e in enumerate(errors) if t in changes]
    elsewhere = [e for t, e in enumerate(errors) if t not in changes]
    metrics = score_detection(changes, detected).as_row() if changes else None
    return _RunResult(
        float(np.mean(at_change)) if at_change else None,
        float(np.mean(elsewhere)) if elsewhere else None,
        detected,
        tuple(metrics) if metrics else None,
    )


def run_benchmark(config: SimConfig, runs: int, solver: Optional[SolverConfig] = None,
                  delta: Optional[float] = None, window: Optional[int] = None,
                  threshold_k: Optional[float] = None, threads: int = 1,
                  threshold_scale: Optional[ThresholdScale] = None) -> BenchmarkReport:
    """Monte Carlo estimation error and detection metrics over `runs` seeded runs."""
    if runs < 1:
        raise ConfigurationError(f"runs must be >= 1, got {runs}")
    solver = solver or SolverConfig()
    delta = settings.SMOOTHING_DELTA if delta is None else delta
    window = settings.PEAK_WINDOW if window is None else window
    threshold_k = settings.PEAK_THRESHOLD_K if threshold_k is None else threshold_k
    threshold_scale = settings.PEAK_THRESHOLD_SCALE if threshold_scale is None else threshold_scale

    truth = simulate_truth(config, solver)
    log_utils.log_message(
        f"[bench] {runs} runs: d={config.d} T={config.T} n={config.n} nu={config.nu:g} eta={config.eta:g} "
        f"changes={list(config.change_times)} threads={threads}"
    )

    def task(run: int) -> _RunResult:
        return _one_run(run, config, truth, solver, delta, window, threshold_k, threshold_scale)

    if threads <= 1:
        results = [task(r) for r in range(runs)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(task, range(runs)))

    scored = [r.metrics for r in results if r.metrics is not None]
    report = BenchmarkReport(
        config=config,
        lambda_=solver.lambda_,
        threshold_scale=threshold_scale,
        runs=runs,
        single_run=runs == 1,
        change_error=_estimate([r.change_error for r in results if r.change_error is not None]),
        non_change_error=_estimate([r.non_change_error for r in results if r.non_change_error is not None]),
        precision=_estimate([m[0] for m in scored]),
        recall=_estimate([m[1] for m in scored]),
        f_score=_estimate([m[2] for m in scored]),
        clean_run_fraction=sum(1 for r in results if not r.detected) / runs,
        detected=[list(r.detected) for r in results],
    )
    log_utils.log_message(
        f"[bench] done: f_score={report.f_score.mean} clean_runs={report.clean_run_fraction:.2f}"
    )
    return report


# --- settings grid ---------------------------------------------------------------

SWEEP_N = (1000, 2000)
SWEEP_ETA = (0.5, 1.0)
SWEEP_NU = (0.1, 0.25)


class SweepReport(BaseModel):
    """One benchmark per (n, eta, nu) cell, in n-major order."""

    schema_version: int = 1
    runs: int
    cells: list[BenchmarkReport]

    def cell(self, n: int, eta: float, nu: float) -> BenchmarkReport:
        for report in self.cells:
            if report.config.n == n and report.config.eta == eta and report.config.nu == nu:
                return report
        raise KeyError((n, eta, nu))

    def axes(self) -> tuple[list[int], list[float], list[float]]:
        def ordered(values):
            return list(dict.fromkeys(values))

        return (ordered(r.config.n for r in self.cells), ordered(r.config.eta for r in self.cells),
                ordered(r.config.nu for r in self.cells))


def run_sweep(base: SimConfig, runs: int, ns: Sequence[int] = SWEEP_N, etas: Sequence[float] = SWEEP_ETA,
              nus: Sequence[float] = SWEEP_NU, **bench_options) -> SweepReport:
    """`run_benchmark` over the n x eta x nu grid; everything else comes from `base`."""
    cells = []
    for n in ns:
        for eta in etas:
            for nu in nus:
                config = base.model_copy(update={"n": int(n), "eta": float(eta), "nu": float(nu)})
                cells.append(run_benchmark(config, runs, **bench_options))
    log_utils.log_message(f"[bench] sweep done: {len(cells)} settings x {runs} runs")
    return SweepReport(runs=runs, cells=cells)
