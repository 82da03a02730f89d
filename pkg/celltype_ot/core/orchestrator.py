"""
The central orchestrator for every pipeline command.

Analysis, simulation, benchmarking and evaluation are composed here from the
numerical modules. Storage goes entirely through the DataAccessLayer injected
at construction, so the same flows run against files or a test double.
"""

from pathlib import Path
from typing import Union

import numpy as np

# Import the abstract DAL, not a concrete implementation
from celltype_ot.data_access.dal import DataAccessLayer
from celltype_ot.data_access.dataset import dataset_cost
from celltype_ot.data_access.report import AnalysisReport, ConfigEcho, MatrixPayload, PairRecord
from celltype_ot.config import settings
from celltype_ot.errors import InsufficientDataError
from celltype_ot.infra import log_utils
from celltype_ot.infra.heatmap import render_heatmap, render_w_series
from celltype_ot.run_config import RunConfig

from . import changepoint
from . import simulation
from . import trajectory
from .distributions import stack
from .uot_solver import solve_sequence


class Orchestrator:
    """Runs pipeline commands using the DAL."""

    def __init__(self, dal: DataAccessLayer):
        """
        Initialises the orchestrator with a data access layer.

        Args:
            dal: A concrete implementation of the DataAccessLayer abstract base class.
        """
        self.dal = dal

    # --- PUBLIC COMMANDS ---

    def analyze(self, run: RunConfig) -> AnalysisReport:
        """
        Ingest a dataset, solve every adjacent pair, detect change points and
        write the report, one heatmap per pair and the W-series plot under `run.out`.
        """
        dataset = self.dal.load_dataset(run.input)
        if dataset.n_times < 2:
            raise InsufficientDataError(f"need ≥ 2 time points, found {dataset.n_times}")
        log_utils.log_message(f"[analyze] {run.input}: {dataset.d} types over {dataset.n_times} time points")

        reducer = run.reducer or "identity"
        solver = run.solver_config()
        marginals = dataset.marginals()
        cost = dataset_cost(dataset, reducer)
        plans = solve_sequence(marginals, cost, solver, delta=run.delta, threads=run.threads)
        series = changepoint.w_series_from_plans(plans, cost, solver.lambda_)

        if len(series) >= changepoint.MIN_SERIES_FOR_PEAKS:
            peaks = changepoint.detect_peaks(series, run.window, run.threshold_k, run.threshold_scale)
            detected, threshold = list(peaks.detected), peaks.threshold_used
        else:
            log_utils.log_message(
                f"[analyze] only {len(series)} W value(s); peak detection needs {changepoint.MIN_SERIES_FOR_PEAKS}, skipping",
                "WARN",
            )
            detected, threshold = [], None

        pairs = []
        for plan, w in zip(plans, series.values):
            forward = trajectory.forward_transition(plan)
            backward = trajectory.backward_transition(plan)
            pairs.append(PairRecord(
                t=plan.time_index, w=float(w), iterations=plan.iterations,
                plan=MatrixPayload.of(plan.entries),
                forward=MatrixPayload.of(forward.entries),
                backward=MatrixPayload.of(backward.entries),
                forward_zero_columns=list(forward.zero_columns),
                backward_zero_columns=list(backward.zero_columns),
            ))

        report = AnalysisReport(
            source=Path(run.input).name,
            label_dictionary=list(dataset.label_dictionary),
            time_values=list(dataset.time_values),
            marginals=stack(marginals).tolist(),
            cost=MatrixPayload.of(cost.entries),
            pairs=pairs,
            w_series=series.values.tolist(),
            change_points=detected,
            threshold_used=threshold,
            config=ConfigEcho(
                lambda_=solver.lambda_, epsilon=solver.epsilon, epsilon_scale=solver.epsilon_scale,
                max_iters=solver.max_iters, convergence_tol=solver.convergence_tol,
                delta=run.delta, window=run.window, threshold_k=run.threshold_k,
                threshold_scale=run.threshold_scale, reducer=reducer,
            ),
        )

        out_dir = Path(run.out) if run.out else settings.output_dir
        self.dal.save_report(report, out_dir / "report.json")
        for plan in plans:
            svg = render_heatmap(plan, dataset.label_dictionary)
            self.dal.save_heatmap(svg, out_dir / "heatmaps" / f"plan_t{plan.time_index:03d}.svg")
        w_plot = render_w_series(series.values, detected, threshold, dataset.time_values)
        self.dal.save_heatmap(w_plot, out_dir / "w_series.svg")
        log_utils.log_message(f"[analyze] change points: {detected}; report in {out_dir}")
        return report

    def simulate(self, run: RunConfig) -> simulation.SimTruth:
        """
        Write one simulated dataset (cells sorted by type within each time
        point) and its ground-truth sidecar next to it.
        """
        config = run.sim_config()
        truth = simulation.simulate_truth(config, run.solver_config())
        sample = simulation.simulate_dataset(config, 0, truth.marginals)
        order = np.lexsort((sample.labels, sample.time_index))

        out_path = Path(run.out) if run.out else settings.output_dir / "simulated.csv"
        self.dal.save_simulated_dataset(
            sample.time_index[order],
            [str(label) for label in sample.labels[order]],
            sample.features[order],
            out_path,
        )
        self.dal.save_truth(self._truth_payload(config, truth), self.truth_path(out_path))
        return truth

    def bench(self, run: RunConfig) -> Union[simulation.BenchmarkReport, simulation.SweepReport]:
        """
        Monte Carlo benchmark, written as JSON to `run.out` (default output/bench.json).
        With `run.sweep` every cell of the n x eta x nu grid is run and the
        other simulation options are shared.
        """
        options = dict(
            solver=run.solver_config(), delta=run.delta, window=run.window,
            threshold_k=run.threshold_k, threshold_scale=run.threshold_scale, threads=run.threads,
        )
        if run.sweep:
            report = simulation.run_sweep(run.sim_config(), run.runs, **options)
        else:
            report = simulation.run_benchmark(run.sim_config(), run.runs, **options)
        out_path = Path(run.out) if run.out else settings.output_dir / "bench.json"
        self.dal.save_benchmark(report.model_dump(mode="json", by_alias=True), out_path)
        return report

    def evaluate(self, run: RunConfig) -> changepoint.DetectionMetrics:
        truth = self.dal.load_index_set(run.truth)
        detected = self.dal.load_index_set(run.detected)
        metrics = changepoint.score_detection(truth, detected)
        log_utils.log_message(
            f"[eval] precision={metrics.precision:.3f} recall={metrics.recall:.3f} f_score={metrics.f_score:.3f}"
        )
        return metrics

    # --- INTERNAL HELPER METHODS ---

    @staticmethod
    def truth_path(dataset_path: Path) -> Path:
        return dataset_path.with_name(dataset_path.stem + ".truth.json")

    @staticmethod
    def _truth_payload(config: simulation.SimConfig, truth: simulation.SimTruth) -> dict:
        return {
            "schema_version": 1,
            "config": config.model_dump(mode="json"),
            "change_times": list(truth.change_times),
            "marginals": stack(truth.marginals).tolist(),
            "cost": MatrixPayload.of(truth.cost.entries).model_dump(),
            "plans": [MatrixPayload.of(p.entries).model_dump() for p in truth.plans],
        }
