"""
Command-line interface for the cell-type transport pipeline.

    analyze   dataset file -> transport plans, W series, change points, SVG figures
    simulate  synthetic dataset plus a ground-truth sidecar
    bench     Monte Carlo estimation-error and detection benchmark, or the settings grid
    eval      precision / recall / F-score of a detected set against the truth

Exit status: 0 success, 2 input error, 3 solver did not converge,
4 configuration error.
"""
import argparse
import sys
from typing import Optional, Sequence

from rich.console import Console
from tabulate import tabulate

from celltype_ot.config import settings
from celltype_ot.core.changepoint import THRESHOLD_SCALES
from celltype_ot.core.embedding import REDUCERS
from celltype_ot.core.orchestrator import Orchestrator
from celltype_ot.data_access.json_dal import JsonDal
from celltype_ot.errors import CellTypeOTError
from celltype_ot.infra import log_utils
from celltype_ot.run_config import RunConfig

console = Console()
err_console = Console(stderr=True)


def _change_list(text: str) -> tuple[int, ...]:
    if text.strip().lower() in ("", "none"):
        return ()
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lambda_", type=float, default=settings.UOT_LAMBDA,
                   help="KL weight on the relaxed source marginal.")
    p.add_argument("--epsilon", type=float, default=None,
                   help="Entropic regularization; overrides --epsilon-scale.")
    p.add_argument("--epsilon-scale", type=float, default=settings.UOT_EPSILON_SCALE,
                   help="Epsilon as a fraction of the largest cost entry.")
    p.add_argument("--max-iters", type=int, default=settings.SOLVER_MAX_ITERS)
    p.add_argument("--delta", type=float, default=settings.SMOOTHING_DELTA,
                   help="Additive smoothing of source marginals.")
    p.add_argument("--window", type=int, default=settings.PEAK_WINDOW,
                   help="Half-width of the local-maximum window.")
    p.add_argument("--threshold-k", type=float, default=settings.PEAK_THRESHOLD_K,
                   help="Peaks must exceed median + k * MAD.")
    p.add_argument("--threshold-scale", choices=THRESHOLD_SCALES, default=settings.PEAK_THRESHOLD_SCALE,
                   help="Take the median and MAD of log W (log) or of W itself (linear).")
    p.add_argument("--threads", type=int, default=settings.THREADS)


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--d", type=int, default=10, help="Number of cell types (even).")
    p.add_argument("--t", type=int, default=50, help="Horizon T; time points are 0..T.")
    p.add_argument("--g", type=int, default=50, help="Genes per cell.")
    p.add_argument("--n", type=int, default=2000, help="Cells per time point.")
    p.add_argument("--nu", type=float, default=0.1, help="Growth amplitude.")
    p.add_argument("--eta", type=float, default=1.0, help="Change magnitude.")
    p.add_argument("--changes", type=_change_list, default=(10, 20, 30, 40),
                   help="Comma-separated change times, or 'none'.")
    p.add_argument("--seed", type=int, default=settings.SIM_SEED)
    p.add_argument("--sine-reading", choices=["outer_pi", "inner_pi"], default="inner_pi",
                   help="outer_pi: exp(nu*pi*sin(x)); inner_pi: exp(nu*sin(pi*x)).")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="celltype-ot",
        description="Cell-type trajectories and change points from snapshot data via unbalanced transport.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    analyze = sub.add_parser("analyze", help="Analyze a dataset file.", formatter_class=fmt)
    analyze.add_argument("--input", required=True, help="Dataset file (time, cell_type, features...).")
    analyze.add_argument("--out", default=None, help="Output directory for report.json and heatmaps/.")
    analyze.add_argument("--reducer", choices=REDUCERS, default="identity",
                         help="Feature reduction before computing centroids.")
    _add_solver_flags(analyze)

    simulate = sub.add_parser("simulate", help="Write a simulated dataset and its truth sidecar.",
                              formatter_class=fmt)
    _add_sim_flags(simulate)
    simulate.add_argument("--lambda", dest="lambda_", type=float, default=settings.UOT_LAMBDA,
                          help="KL weight used for the ground-truth plans.")
    simulate.add_argument("--out", default=None, help="Dataset file; the sidecar is <stem>.truth.json.")

    bench = sub.add_parser("bench", help="Monte Carlo benchmark.", formatter_class=fmt)
    bench.add_argument("--runs", type=int, default=settings.BENCH_RUNS)
    bench.add_argument("--sweep", action="store_true",
                       help="Run the n x eta x nu grid (n in 1000,2000; eta in 0.5,1; nu in 0.1,0.25).")
    bench.add_argument("--reducer", choices=REDUCERS, default="principal_axes")
    bench.add_argument("--out", default=None, help="Benchmark report (JSON).")
    _add_sim_flags(bench)
    _add_solver_flags(bench)

    evaluate = sub.add_parser("eval", help="Score detected change points.", formatter_class=fmt)
    evaluate.add_argument("--truth", required=True, help="JSON list, or a truth sidecar.")
    evaluate.add_argument("--detected", required=True, help="JSON list, or an analysis report.")
    return parser


def _print_analysis(report) -> None:
    rows = [[p.t, report.time_values[p.t], report.time_values[p.t + 1], p.w, "*" if p.t in report.change_points else ""]
            for p in report.pairs]
    console.print(tabulate(rows, headers=["t", "from", "to", "W", "change"], floatfmt=".6g"),
                  markup=False, soft_wrap=True)
    console.print(f"change points: {report.change_points}", markup=False)


def _print_bench(report) -> None:
    def cell(est):
        return "n/a" if est.mean is None else f"{est.mean:.4g} ({est.se:.2g})"

    rows = [
        ["plan error, change points", cell(report.change_error)],
        ["plan error, non-change points", cell(report.non_change_error)],
        ["precision", cell(report.precision)],
        ["recall", cell(report.recall)],
        ["F-score", cell(report.f_score)],
        ["runs without detections", f"{report.clean_run_fraction:.2f}"],
    ]
    console.print(tabulate(rows, headers=["statistic", "mean (se)"]), markup=False)
    if report.single_run:
        console.print("single run: standard errors are reported as 0", markup=False)


def _scaled(est, factor: float, se_factor: Optional[float] = None) -> str:
    se_factor = factor if se_factor is None else se_factor
    return "n/a" if est.mean is None else f"{est.mean * factor:.2f}({est.se * se_factor:.2f})"


def _print_sweep(report) -> None:
    """Plan errors x 10^4 in one table, then detection metrics (se x 100) per n."""
    ns, etas, nus = report.axes()
    headers = ["n", "eta"] + [f"change nu={nu:g}" for nu in nus] + [f"non-change nu={nu:g}" for nu in nus]
    rows = []
    for n in ns:
        for eta in etas:
            cells = [report.cell(n, eta, nu) for nu in nus]
            rows.append([n, f"{eta:g}"] + [_scaled(c.change_error, 1e4) for c in cells]
                        + [_scaled(c.non_change_error, 1e4) for c in cells])
    console.print(f"plan estimation error x 10^4 (se x 10^4), {report.runs} runs", markup=False)
    console.print(tabulate(rows, headers=headers), markup=False, soft_wrap=True)

    for n in ns:
        headers = ["eta"] + [f"{name} nu={nu:g}" for nu in nus for name in ("precision", "recall", "F-score")]
        rows = []
        for eta in etas:
            row = [f"{eta:g}"]
            for nu in nus:
                cell = report.cell(n, eta, nu)
                row += [_scaled(cell.precision, 1.0, 100.0), _scaled(cell.recall, 1.0, 100.0),
                        _scaled(cell.f_score, 1.0, 100.0)]
            rows.append(row)
        console.print(f"\nchange-point detection, n={n} (se x 100)", markup=False)
        console.print(tabulate(rows, headers=headers), markup=False, soft_wrap=True)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parses CLI arguments, runs the command and returns its exit status."""
    args = build_parser().parse_args(argv)
    log_utils.log_message(f"[cli] {args.command} invoked", "DEBUG")

    try:
        run = RunConfig.build(**vars(args))
        orchestrator = Orchestrator(JsonDal())
        if run.command == "analyze":
            _print_analysis(orchestrator.analyze(run))
        elif run.command == "simulate":
            truth = orchestrator.simulate(run)
            console.print(f"simulated {len(truth.marginals)} time points; change times {list(truth.change_times)}",
                          markup=False)
        elif run.command == "bench":
            report = orchestrator.bench(run)
            if run.sweep:
                _print_sweep(report)
            else:
                _print_bench(report)
        elif run.command == "eval":
            metrics = orchestrator.evaluate(run)
            console.print(tabulate([metrics.as_row()], headers=["precision", "recall", "f_score"], floatfmt=".3f"),
                          markup=False)
    except CellTypeOTError as exc:
        log_utils.log_message(f"[cli] {type(exc).__name__}: {exc}", "ERROR")
        err_console.print(f"error[{type(exc).__name__}]: {exc}", markup=False)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
