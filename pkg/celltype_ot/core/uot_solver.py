"""
Balanced and semi-relaxed unbalanced optimal transport between marginals.

The unbalanced problem keeps the column constraint pi^T 1 = q_tgt exact and
replaces the row constraint by a KL penalty:

    min  sum_jk m_jk pi_jk + lambda * KL(pi 1 || q_src)   s.t. pi^T 1 = q_tgt

It is solved with entropic regularization epsilon. Each epsilon stage runs
generalized scaling sweeps (u <- (q_src / Kv)^(lambda / (lambda + epsilon)),
v <- q_tgt / K^T u) with log-domain absorption, then polishes the row
potential with damped Newton steps on the dual. epsilon is annealed
geometrically from the cost scale down to its target. The balanced problem is
the lambda = infinity limit of the same iteration.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg
from scipy.special import logsumexp, rel_entr, softmax

from celltype_ot.config import settings
from celltype_ot.core.distributions import Marginal, smooth
from celltype_ot.errors import ConvergenceError, InputError, PreconditionError
from celltype_ot.infra import log_utils

COLUMN_TOL = 1e-8
SCALING_BOUNDS = (1e-100, 1e100)

_ANNEAL_FACTOR = 0.25
_SWEEPS_PER_STAGE = 25
_STAGE_TOL = 1e-6
_ARMIJO = 1e-4
_MASS_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Symmetric nonnegative d x d cost with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.array(self.entries, dtype=float, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise InputError(f"cost matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise InputError("cost entries must be finite and nonnegative")
        if np.any(np.diag(m) != 0):
            raise InputError("cost matrix must have a zero diagonal")
        if not np.allclose(m, m.T, rtol=1e-12, atol=1e-12):
            raise InputError("cost matrix must be symmetric")
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "entries", m)

    @property
    def d(self) -> int:
        return int(self.entries.shape[0])

    @property
    def max_cost(self) -> float:
        return float(self.entries.max())

    def permuted(self, order: Sequence[int]) -> "CostMatrix":
        idx = np.asarray(order)
        return CostMatrix(self.entries[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Joint distribution pi^{t,t+1}; columns sum to the target marginal."""

    entries: np.ndarray
    source_marginal: Marginal
    target_marginal: Marginal
    time_index: int = 0
    iterations: int = field(default=0, compare=False)

    def __post_init__(self):
        pi = np.array(self.entries, dtype=float, copy=True)
        d = self.target_marginal.d
        if pi.shape != (d, d) or self.source_marginal.d != d:
            raise InputError(f"plan shape {pi.shape} does not match marginals of size {d}")
        if not np.all(np.isfinite(pi)) or np.any(pi < 0):
            raise InputError("plan entries must be finite and nonnegative")
        residual = float(np.max(np.abs(pi.sum(axis=0) - self.target_marginal.probs)))
        if residual > COLUMN_TOL:
            raise InputError(f"plan column sums miss the target marginal by {residual:.3e}")
        pi.setflags(write=False)
        object.__setattr__(self, "entries", pi)

    @property
    def d(self) -> int:
        return int(self.entries.shape[0])

    @property
    def row_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=1)

    @property
    def column_marginal(self) -> np.ndarray:
        return self.entries.sum(axis=0)


class SolverConfig(BaseModel):
    """Knobs of the scaling solver. `epsilon=None` means epsilon_scale * max cost."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    lambda_: float = Field(default_factory=lambda: settings.UOT_LAMBDA, gt=0, alias="lambda")
    epsilon: Optional[float] = Field(default=None, gt=0)
    epsilon_scale: float = Field(default_factory=lambda: settings.UOT_EPSILON_SCALE, gt=0)
    max_iters: int = Field(default_factory=lambda: settings.SOLVER_MAX_ITERS, ge=1)
    convergence_tol: float = Field(default_factory=lambda: settings.SOLVER_TOL, gt=0)

    def resolve_epsilon(self, m: CostMatrix) -> float:
        if self.epsilon is not None:
            return self.epsilon
        scale = m.max_cost if m.max_cost > 0 else 1.0
        return self.epsilon_scale * scale


def entropic_gap_bound(d: int, epsilon: float) -> float:
    """Upper bound on how far the entropic plan's exact objective sits above the optimum.

    The negative entropy of a unit-mass d x d plan lies in [-2 log d, 0].
    """
    return 2.0 * epsilon * math.log(d)


def objective(plan: TransportPlan, m: CostMatrix, lam: Optional[float]) -> float:
    """Exact objective without the entropic term; `lam=None` is the balanced cost."""
    value = float(np.sum(m.entries * plan.entries))
    if lam is not None:
        value += lam * float(np.sum(rel_entr(plan.row_marginal, plan.source_marginal.probs)))
    return value


# --- scaling iteration ------------------------------------------------------


@dataclass
class _Problem:
    log_p: np.ndarray
    log_q: np.ndarray
    p: np.ndarray
    q: np.ndarray
    m: np.ndarray
    lam: Optional[float]  # None is the balanced (lambda = infinity) problem

    def kappa(self, eps: float) -> float:
        return 1.0 if self.lam is None else self.lam / (self.lam + eps)


def _column_potential(f, prob: _Problem, eps: float) -> np.ndarray:
    # exact projection on pi^T 1 = q; zero columns get g = -inf
    with np.errstate(divide="ignore"):
        return eps * (prob.log_q - logsumexp((f[:, None] - prob.m) / eps, axis=0))


def _recenter(f, prob: _Problem) -> np.ndarray:
    """Shift f so that sum_j p_j exp(-f_j / lambda) = 1, i.e. the row target has unit mass.

    Plans depend on f only up to a constant; this fixes the constant at its
    optimal value instead of letting it decay at rate kappa.
    """
    if prob.lam is None:
        return f - f.max()
    x = -f / prob.lam
    if np.max(np.abs(x)) < 1.0:
        shift = prob.lam * np.log1p(np.dot(prob.p, np.expm1(x)))
    else:
        shift = prob.lam * logsumexp(prob.log_p + x)
    return f + shift


def _centered_change(f_new, f_old, eps: float) -> float:
    delta = (f_new - f_old) / eps
    return float(np.max(np.abs(delta - delta.mean())))


def _scaling_sweeps(f, prob: _Problem, eps: float, sweeps: int, tol: float):
    """Generalized scaling in the multiplicative domain with log absorption.

    Potentials (alpha, beta) hold the absorbed part of the scalings; u and v
    are folded into them whenever a component leaves SCALING_BOUNDS. A kernel
    row that underflows entirely hands over to the log-domain sweeps.
    """
    lo, hi = SCALING_BOUNDS
    kappa = prob.kappa(eps)
    live = prob.q > 0
    alpha = f.copy()
    beta = np.where(live, _column_potential(alpha, prob, eps), 0.0)

    def kernel_for(a, b):
        return np.exp((a[:, None] + b[None, :] - prob.m) / eps)

    kernel = kernel_for(alpha, beta)
    v = np.ones_like(prob.q)
    f_prev = alpha
    done = 0
    with np.errstate(divide="ignore", over="ignore", under="ignore", invalid="ignore"):
        for done in range(1, sweeps + 1):
            kv = kernel @ v
            u = (prob.p / kv) ** kappa * np.exp(-alpha * (1.0 - kappa) / eps)
            if not np.all(np.isfinite(u)) or np.any(u == 0):
                return _log_sweeps(f_prev, prob, eps, sweeps - done + 1, tol, done - 1)
            v = np.where(live, prob.q / (kernel.T @ u), 0.0)
            if not np.all(np.isfinite(v)):
                return _log_sweeps(f_prev, prob, eps, sweeps - done + 1, tol, done - 1)

            f_cur = _recenter(alpha + eps * np.log(u), prob)
            if _centered_change(f_cur, f_prev, eps) < tol:
                return f_cur, done, True
            f_prev = f_cur

            if np.any((u < lo) | (u > hi)) or np.any((v[live] < lo) | (v[live] > hi)):
                alpha = alpha + eps * np.log(u)
                beta = np.where(live, beta + eps * np.log(v), 0.0)
                kernel = kernel_for(alpha, beta)
                v = np.ones_like(prob.q)
    return f_prev, done, False


def _log_sweeps(f, prob: _Problem, eps: float, sweeps: int, tol: float, done: int = 0):
    kappa = prob.kappa(eps)
    for _ in range(max(sweeps, 0)):
        g = _column_potential(f, prob, eps)
        f_new = _recenter(kappa * eps * (prob.log_p - logsumexp((g[None, :] - prob.m) / eps, axis=1)), prob)
        done += 1
        change = _centered_change(f_new, f, eps)
        f = f_new
        if change < tol:
            return f, done, True
    return f, done, False


# --- Newton polish on the dual ------------------------------------------------


def _dual_value(f, prob: _Problem, eps: float) -> float:
    """Concave dual in the row potential f (column potential eliminated exactly)."""
    with np.errstate(over="ignore"):
        if prob.lam is None:
            row_term = float(np.dot(prob.p, f))
        else:
            row_term = float(-prob.lam * np.dot(prob.p, np.expm1(-f / prob.lam)))
    lse = logsumexp((f[:, None] - prob.m) / eps, axis=0)
    live = prob.q > 0
    value = row_term - eps * float(np.dot(prob.q[live], lse[live]))
    return value if np.isfinite(value) else -np.inf


def _dual_gradient(f, prob: _Problem, eps: float):
    weights = softmax((f[:, None] - prob.m) / eps, axis=0)  # column-conditional row weights
    row_mass = weights @ prob.q
    target = prob.p if prob.lam is None else prob.p * np.exp(-f / prob.lam)
    return target - row_mass, weights, row_mass, target


def _newton_step(f, prob: _Problem, eps: float, grad, weights, row_mass, target) -> Optional[np.ndarray]:
    """One damped Newton ascent step; None when the line search finds no increase."""
    curvature = np.zeros_like(f) if prob.lam is None else target / prob.lam
    hess = np.diag(curvature) + (np.diag(row_mass) - (weights * prob.q[None, :]) @ weights.T) / eps
    # constant shifts are a (near) null direction; pin them
    d = f.size
    scale = max(float(np.mean(np.diag(hess))), 1.0)
    hess = hess + np.full((d, d), scale / d) + 1e-12 * scale * np.eye(d)
    try:
        direction = linalg.solve(hess, grad, assume_a="sym")
    except (linalg.LinAlgError, ValueError):
        direction = grad
    slope = float(np.dot(grad, direction))
    if not np.isfinite(slope) or slope <= 0:
        direction, slope = grad, float(np.dot(grad, grad))
    value = _dual_value(f, prob, eps)
    if slope <= 1e-11 * max(1.0, abs(value)):
        # inside the quadratic region the Armijo test is below float resolution
        return f + direction
    step = 1.0
    while step > 1e-12:
        candidate = f + step * direction
        if _dual_value(candidate, prob, eps) >= value + _ARMIJO * step * slope:
            return candidate
        step *= 0.5
    return None


def _newton_polish(f, prob: _Problem, eps: float, budget: int, tol: float):
    """Damped Newton ascent on the dual until the potentials settle or the rows are met.

    The gradient is the row-marginal residual, so a residual below the mass
    tolerance is optimal to that accuracy even when the potential of a nearly
    empty row is still drifting.
    """
    mass_tol = max(min(tol, COLUMN_TOL), _MASS_FLOOR)
    done = 0
    for done in range(1, budget + 1):
        grad, weights, row_mass, target = _dual_gradient(f, prob, eps)
        residual = float(np.max(np.abs(grad)))
        if residual < mass_tol:
            return f, done, True
        stepped = _newton_step(f, prob, eps, grad, weights, row_mass, target)
        if stepped is None:
            # no ascent left at machine precision: accept if the marginal is met
            return f, done, residual < max(tol, 1e-9)
        f_new = _recenter(stepped, prob)
        change = _centered_change(f_new, f, eps)
        f = f_new
        if change < tol:
            return f, done, True
    return f, done, False


# --- driver -------------------------------------------------------------------


def _anneal_schedule(eps: float, m: np.ndarray) -> list[float]:
    start = max(float(m.max()), eps)
    schedule = []
    current = start
    while current > eps * (1.0 + 1e-12):
        schedule.append(current)
        current *= _ANNEAL_FACTOR
    schedule.append(eps)
    return schedule


def _row_residual(f, prob: _Problem, eps: float) -> float:
    g = _column_potential(f, prob, eps)
    with np.errstate(under="ignore"):
        pi = np.exp((f[:, None] + g[None, :] - prob.m) / eps)
    target = prob.p if prob.lam is None else prob.p * np.exp(-f / prob.lam)
    return float(np.max(np.abs(pi.sum(axis=1) - target)))


def _solve(q_src: Marginal, q_tgt: Marginal, m: CostMatrix, config: SolverConfig,
           lam: Optional[float], time_index: int) -> TransportPlan:
    if q_src.d != m.d or q_tgt.d != m.d:
        raise InputError(f"marginals of size {q_src.d}/{q_tgt.d} do not match a {m.d}x{m.d} cost")
    if not q_src.strictly_positive:
        raise PreconditionError(
            "source marginal has zero entries; apply smooth() before solving (KL(pi 1 || q_src) diverges)"
        )
    eps = config.resolve_epsilon(m)
    with np.errstate(divide="ignore"):
        prob = _Problem(
            log_p=np.log(q_src.probs), log_q=np.log(q_tgt.probs),
            p=np.asarray(q_src.probs), q=np.asarray(q_tgt.probs), m=np.asarray(m.entries), lam=lam,
        )

    f = np.zeros(m.d)
    used = 0
    schedule = _anneal_schedule(eps, prob.m)
    for stage, stage_eps in enumerate(schedule):
        final = stage == len(schedule) - 1
        tol = config.convergence_tol if final else max(config.convergence_tol, _STAGE_TOL)
        budget = config.max_iters - used
        f, done, converged = _scaling_sweeps(f, prob, stage_eps, min(_SWEEPS_PER_STAGE, budget), tol)
        used += done
        if not converged and config.max_iters > used:
            f, done, converged = _newton_polish(f, prob, stage_eps, config.max_iters - used, tol)
            used += done
        if not converged and final:
            residual = _row_residual(f, prob, stage_eps)
            raise ConvergenceError(
                f"scaling did not converge in {config.max_iters} iterations "
                f"(row marginal residual {residual:.3e})",
                residual=residual, iterations=used,
            )

    g = _column_potential(f, prob, eps)
    with np.errstate(under="ignore"):
        pi = np.exp((f[:, None] + g[None, :] - prob.m) / eps)
    log_utils.log_message(
        f"[solver] t={time_index} d={m.d} eps={eps:.3g} lambda={'inf' if lam is None else f'{lam:g}'} "
        f"converged in {used} iterations", "DEBUG"
    )
    return TransportPlan(pi, q_src, q_tgt, time_index=time_index, iterations=used)


def solve_balanced(q_src: Marginal, q_tgt: Marginal, m: CostMatrix,
                   config: Optional[SolverConfig] = None, time_index: int = 0) -> TransportPlan:
    """Entropic OT with both marginals imposed (the lambda = infinity limit)."""
    if not q_tgt.strictly_positive:
        raise PreconditionError("balanced transport needs a strictly positive target marginal; smooth it first")
    return _solve(q_src, q_tgt, m, config or SolverConfig(), None, time_index)


def solve_unbalanced(q_src: Marginal, q_tgt: Marginal, m: CostMatrix,
                     config: Optional[SolverConfig] = None, time_index: int = 0) -> TransportPlan:
    """Semi-relaxed OT: exact columns, KL-penalized rows."""
    config = config or SolverConfig()
    return _solve(q_src, q_tgt, m, config, config.lambda_, time_index)


def transport_cost(q_src: Marginal, q_tgt: Marginal, m: CostMatrix,
                   config: Optional[SolverConfig] = None) -> float:
    """W^lambda(q_src, q_tgt), evaluated at the solver's plan without the entropic term."""
    config = config or SolverConfig()
    plan = solve_unbalanced(q_src, q_tgt, m, config)
    return max(objective(plan, m, config.lambda_), 0.0)


def solve_sequence(marginals: Sequence[Marginal], m: CostMatrix, config: Optional[SolverConfig] = None,
                   delta: Optional[float] = None, threads: int = 1) -> list[TransportPlan]:
    """Unbalanced plans for every adjacent pair (Q_t, Q_{t+1}), in time order.

    With `delta`, source marginals are smoothed first. Errors name the pair.
    """
    config = config or SolverConfig()

    def solve_pair(t: int) -> TransportPlan:
        source = marginals[t] if delta is None else smooth(marginals[t], delta)
        try:
            return solve_unbalanced(source, marginals[t + 1], m, config, time_index=t)
        except ConvergenceError as exc:
            raise exc.at_time(t) from exc
        except PreconditionError as exc:
            raise PreconditionError(f"t={t}: {exc}") from exc

    pairs = range(len(marginals) - 1)
    if threads <= 1:
        return [solve_pair(t) for t in pairs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(solve_pair, pairs))
