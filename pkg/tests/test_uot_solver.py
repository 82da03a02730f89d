import math

import numpy as np
import pytest

from celltype_ot.core.distributions import Marginal, smooth
from celltype_ot.core.oracle import oracle_solve
from celltype_ot.core.uot_solver import (
    CostMatrix,
    SolverConfig,
    TransportPlan,
    entropic_gap_bound,
    objective,
    solve_balanced,
    solve_sequence,
    solve_unbalanced,
    transport_cost,
)
from celltype_ot.errors import ConvergenceError, InputError, PreconditionError

SWAP = CostMatrix([[0.0, 1.0], [1.0, 0.0]])
LINE = CostMatrix([[0.0, 1.0, 4.0], [1.0, 0.0, 1.0], [4.0, 1.0, 0.0]])


def test_cost_matrix_validation():
    with pytest.raises(InputError):
        CostMatrix([[0.0, 1.0], [2.0, 0.0]])
    with pytest.raises(InputError):
        CostMatrix([[1.0, 1.0], [1.0, 0.0]])
    with pytest.raises(InputError):
        CostMatrix([[0.0, -1.0], [-1.0, 0.0]])
    with pytest.raises(InputError):
        CostMatrix([[0.0, 1.0, 2.0]])


def test_solver_config_defaults_follow_settings():
    config = SolverConfig()
    assert config.lambda_ == 1.0
    assert config.resolve_epsilon(LINE) == pytest.approx(4e-3)
    assert SolverConfig(epsilon=0.5).resolve_epsilon(LINE) == 0.5
    assert SolverConfig.model_validate({"lambda": 3.0}).lambda_ == 3.0


def test_balanced_identical_marginals_stay_on_diagonal():
    q = Marginal([0.5, 0.5])
    plan = solve_balanced(q, q, SWAP, SolverConfig(epsilon=1e-3))
    assert plan.entries[0, 1] <= 1e-3 and plan.entries[1, 0] <= 1e-3
    np.testing.assert_allclose(np.diag(plan.entries), [0.5, 0.5], atol=1e-3)


def test_balanced_point_masses_move_everything():
    src = smooth(Marginal([1.0, 0.0]), 1e-9)
    tgt = smooth(Marginal([0.0, 1.0]), 1e-9)
    plan = solve_balanced(src, tgt, SWAP, SolverConfig(epsilon=1e-3))
    assert plan.entries[0, 1] == pytest.approx(1.0, abs=1e-6)
    assert objective(plan, SWAP, None) == pytest.approx(1.0, abs=1e-6)


def test_balanced_cost_of_partial_shift():
    plan = solve_balanced(Marginal([0.7, 0.3]), Marginal([0.4, 0.6]), SWAP, SolverConfig(epsilon=1e-3))
    assert objective(plan, SWAP, None) == pytest.approx(0.3, abs=1e-6)


def test_balanced_needs_positive_target():
    with pytest.raises(PreconditionError):
        solve_balanced(Marginal([0.5, 0.5]), Marginal([1.0, 0.0]), SWAP)


def test_unbalanced_plan_invariants():
    src, tgt = Marginal([0.2, 0.3, 0.5]), Marginal([0.6, 0.0, 0.4])
    plan = solve_unbalanced(src, tgt, LINE)
    assert isinstance(plan, TransportPlan)
    assert np.all(plan.entries >= 0)
    assert np.max(np.abs(plan.column_marginal - tgt.probs)) <= 1e-8
    assert plan.entries.sum() == pytest.approx(1.0, abs=1e-8)
    assert np.all(plan.entries[:, 1] == 0.0)
    assert plan.iterations >= 1


@pytest.mark.parametrize("lam", [0.1, 1.0, 10.0])
def test_unbalanced_identical_marginals_cost_nothing(lam):
    q = Marginal([0.2, 0.3, 0.5])
    assert transport_cost(q, q, LINE, SolverConfig(lambda_=lam)) <= 1e-4


def test_vanishing_lambda_reaches_cost_only_minimum():
    # the diagonal is free, so moving no mass at all is the cost-only optimum
    src, tgt = Marginal([0.7, 0.2, 0.1]), Marginal([0.1, 0.3, 0.6])
    plan = solve_unbalanced(src, tgt, LINE, SolverConfig(lambda_=1e-6))
    assert objective(plan, LINE, 1e-6) <= 1e-3
    np.testing.assert_allclose(np.diag(plan.entries), tgt.probs, atol=1e-3)


def test_nearly_empty_source_row_converges():
    m = CostMatrix([[0.0, 1.41, 7.74], [1.41, 0.0, 2.82], [7.74, 2.82, 0.0]])
    a = np.array([1.2e-6, 0.082, 0.918])
    b = np.array([1.3e-4, 0.99983, 4.0e-5])
    src, tgt = Marginal(a / a.sum()), Marginal(b / b.sum())
    plan = solve_unbalanced(src, tgt, m, SolverConfig(lambda_=0.1))
    assert plan.iterations < SolverConfig().max_iters
    assert np.max(np.abs(plan.column_marginal - tgt.probs)) <= 1e-8


def test_sparse_random_marginals_converge():
    rng = np.random.default_rng(31)
    for _ in range(40):
        d = int(rng.integers(2, 12))
        points = rng.normal(scale=2.0, size=(d, 2))
        m = CostMatrix(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
        src = smooth(Marginal.from_vector(rng.dirichlet(np.full(d, 0.2))), 1e-6)
        tgt = Marginal.from_vector(rng.dirichlet(np.full(d, 0.2)))
        lam = float(rng.choice([0.1, 1.0, 10.0]))
        plan = solve_unbalanced(src, tgt, m, SolverConfig(lambda_=lam))
        assert np.max(np.abs(plan.column_marginal - tgt.probs)) <= 1e-8
        assert objective(plan, m, lam) >= -1e-12


def test_unbalanced_matches_grid_oracle():
    src, tgt = Marginal([0.8, 0.2]), Marginal([0.3, 0.7])
    plan = solve_unbalanced(src, tgt, SWAP, SolverConfig(lambda_=1.0))
    reference = oracle_solve(src, tgt, SWAP, 1.0, grid_step=1e-4)
    assert abs(objective(plan, SWAP, 1.0) - objective(reference, SWAP, 1.0)) <= 1e-4
    # optimum keeps type 1 in place and relaxes the rows
    assert plan.entries[1, 0] <= 1e-6
    assert plan.entries[0, 1] == pytest.approx(reference.entries[0, 1], abs=1e-3)


def test_entropic_gap_shrinks_with_epsilon():
    src, tgt = Marginal([0.8, 0.2]), Marginal([0.3, 0.7])
    reference = objective(oracle_solve(src, tgt, SWAP, 1.0, grid_step=1e-4), SWAP, 1.0)
    gaps = []
    for eps in (1e-1, 1e-2, 1e-3):
        plan = solve_unbalanced(src, tgt, SWAP, SolverConfig(epsilon=eps))
        gap = objective(plan, SWAP, 1.0) - reference
        assert gap <= entropic_gap_bound(2, eps) + 1e-8
        gaps.append(gap)
    assert gaps[0] > gaps[1] > gaps[2]


def test_entropic_gap_bound_formula():
    assert entropic_gap_bound(10, 1e-3) == pytest.approx(2e-3 * math.log(10))


def test_large_lambda_approaches_balanced():
    src, tgt = Marginal([0.6, 0.4]), Marginal([0.3, 0.7])
    config = SolverConfig(lambda_=1e8, epsilon=1e-3)
    relaxed = solve_unbalanced(src, tgt, SWAP, config)
    assert np.max(np.abs(relaxed.row_marginal - src.probs)) <= 1e-4
    balanced = solve_balanced(src, tgt, SWAP, config)
    np.testing.assert_allclose(relaxed.entries, balanced.entries, atol=1e-3)


def test_transport_cost_is_permutation_equivariant():
    rng = np.random.default_rng(11)
    d = 5
    points = rng.normal(size=(d, 2))
    m = CostMatrix(((points[:, None, :] - points[None, :, :]) ** 2).sum(axis=2))
    src = Marginal(rng.dirichlet(np.ones(d)))
    tgt = Marginal(rng.dirichlet(np.ones(d)))
    order = rng.permutation(d)
    base = transport_cost(src, tgt, m)
    permuted = transport_cost(Marginal(src.probs[order]), Marginal(tgt.probs[order]), m.permuted(order))
    assert abs(base - permuted) <= 1e-8


def test_solver_is_deterministic():
    src, tgt = Marginal([0.2, 0.3, 0.5]), Marginal([0.5, 0.25, 0.25])
    first = solve_unbalanced(src, tgt, LINE)
    second = solve_unbalanced(src, tgt, LINE)
    assert np.array_equal(first.entries, second.entries)


def test_zero_source_entry_is_rejected():
    with pytest.raises(PreconditionError, match="smooth"):
        solve_unbalanced(Marginal([1.0, 0.0]), Marginal([0.5, 0.5]), SWAP)


def test_mismatched_sizes_are_rejected():
    with pytest.raises(InputError):
        solve_unbalanced(Marginal([0.5, 0.5]), Marginal([0.5, 0.5]), LINE)


def test_iteration_cap_raises_convergence_error():
    with pytest.raises(ConvergenceError) as info:
        solve_unbalanced(Marginal([0.2, 0.3, 0.5]), Marginal([0.5, 0.25, 0.25]), LINE, SolverConfig(max_iters=1))
    assert info.value.residual >= 0
    assert info.value.exit_code == 3


def test_solve_sequence_orders_plans_and_tags_failures():
    marginals = [Marginal([0.5, 0.5]), Marginal([0.25, 0.75]), Marginal([0.6, 0.4])]
    plans = solve_sequence(marginals, SWAP, threads=2)
    assert [p.time_index for p in plans] == [0, 1]
    serial = solve_sequence(marginals, SWAP)
    assert all(np.array_equal(a.entries, b.entries) for a, b in zip(plans, serial))

    with pytest.raises(PreconditionError, match="t=1"):
        solve_sequence([Marginal([0.5, 0.5]), Marginal([1.0, 0.0]), Marginal([0.5, 0.5])], SWAP)
    assert len(solve_sequence([Marginal([0.5, 0.5]), Marginal([1.0, 0.0]), Marginal([0.5, 0.5])], SWAP,
                              delta=1e-6)) == 2


def test_sequence_convergence_error_names_time_point():
    marginals = [Marginal([0.2, 0.3, 0.5]), Marginal([0.5, 0.25, 0.25])]
    with pytest.raises(ConvergenceError, match="t=0") as info:
        solve_sequence(marginals, LINE, SolverConfig(max_iters=1))
    assert info.value.time_index == 0


@pytest.mark.slow
def test_solver_never_worse_than_oracle_on_random_instances():
    rng = np.random.default_rng(2024)
    for d, count, step in ((2, 100, 1e-3), (3, 20, 1e-2)):
        for _ in range(count):
            upper = np.triu(rng.uniform(0.1, 5.0, size=(d, d)), 1)
            m = CostMatrix(upper + upper.T)
            src = Marginal(rng.dirichlet(np.ones(d)))
            tgt = Marginal(rng.dirichlet(np.ones(d)))
            lam = float(rng.choice([0.1, 1.0, 10.0]))
            plan = solve_unbalanced(src, tgt, m, SolverConfig(lambda_=lam))
            reference = oracle_solve(src, tgt, m, lam, grid_step=step)
            assert objective(plan, m, lam) <= objective(reference, m, lam) + 1e-3


def test_solver_never_worse_than_oracle_small_sample():
    rng = np.random.default_rng(7)
    for d, count, step in ((2, 5, 1e-3), (3, 2, 2e-2)):
        for _ in range(count):
            upper = np.triu(rng.uniform(0.1, 5.0, size=(d, d)), 1)
            m = CostMatrix(upper + upper.T)
            src = Marginal(rng.dirichlet(np.ones(d)))
            tgt = Marginal(rng.dirichlet(np.ones(d)))
            plan = solve_unbalanced(src, tgt, m)
            reference = oracle_solve(src, tgt, m, 1.0, grid_step=step)
            assert objective(plan, m, 1.0) <= objective(reference, m, 1.0) + 1e-3
