import math

import numpy as np
import pytest

from celltype_ot.core.distributions import (
    GrowthProfile,
    Marginal,
    Snapshot,
    apply_growth,
    empirical_marginal,
    smooth,
)
from celltype_ot.errors import DegenerateInputError, InputError, PreconditionError


def test_empirical_marginal_counts_labels():
    q = empirical_marginal(Snapshot(0, [1, 2, 2, 3]), 3)
    np.testing.assert_allclose(q.probs, [0.25, 0.5, 0.25], atol=1e-15)

    q = empirical_marginal(Snapshot(1, [1, 3, 3, 3]), 3)
    np.testing.assert_allclose(q.probs, [0.25, 0.0, 0.75], atol=1e-15)

    q = empirical_marginal(Snapshot(0, [2]), 2)
    np.testing.assert_array_equal(q.probs, [0.0, 1.0])


def test_empirical_marginal_sums_to_one_for_large_snapshots():
    labels = np.random.default_rng(3).integers(1, 8, size=200_000)
    q = empirical_marginal(Snapshot(0, labels), 7)
    assert abs(q.probs.sum() - 1.0) <= 1e-12


def test_empirical_marginal_names_out_of_range_record():
    with pytest.raises(InputError, match="record 2: label 4"):
        empirical_marginal(Snapshot(0, [1, 2, 4, 1]), 3)


def test_snapshot_needs_cells():
    with pytest.raises(InputError):
        Snapshot(0, [])


def test_marginal_rejects_bad_vectors():
    with pytest.raises(InputError):
        Marginal([0.5, 0.6])
    with pytest.raises(InputError):
        Marginal([1.5, -0.5])


def test_smooth_direct_formula():
    q = smooth(Marginal([0.25, 0.0, 0.75]), 0.01)
    np.testing.assert_allclose(q.probs, np.array([0.26, 0.01, 0.76]) / 1.03, atol=1e-15)
    assert q.strictly_positive

    np.testing.assert_allclose(smooth(Marginal([1.0, 0.0]), 1.0).probs, [2 / 3, 1 / 3], atol=1e-15)


def test_smooth_vanishes_as_delta_shrinks():
    q = Marginal([0.5, 0.5])
    np.testing.assert_allclose(smooth(q, 1e-12).probs, [0.5, 0.5], atol=1e-15)

    base = Marginal([0.25, 0.0, 0.75])
    deviations = [np.max(np.abs(smooth(base, delta).probs - base.probs)) for delta in (1e-3, 1e-6, 1e-9)]
    assert deviations[0] > deviations[1] > deviations[2]


def test_smooth_requires_positive_delta():
    with pytest.raises(PreconditionError):
        smooth(Marginal([0.5, 0.5]), 0.0)


def test_apply_growth_reweights():
    q = apply_growth(Marginal([0.5, 0.5]), GrowthProfile([2.0, 1.0]))
    np.testing.assert_allclose(q.probs, [2 / 3, 1 / 3], atol=1e-15)


def test_apply_growth_uniform_rates_is_identity():
    q = Marginal([0.2, 0.3, 0.5])
    assert apply_growth(q, GrowthProfile([1.0, 1.0, 1.0])).probs.tolist() == q.probs.tolist()
    assert apply_growth(q, GrowthProfile([4.0, 4.0, 4.0])).probs.tolist() == q.probs.tolist()


def test_apply_growth_is_scale_invariant():
    q = Marginal(np.full(10, 0.1))
    rates = np.array([math.exp(0.1 * math.pi * math.sin((j - 1) / 10)) for j in range(1, 11)])
    grown = apply_growth(q, GrowthProfile(rates))
    scaled = apply_growth(q, GrowthProfile(7.5 * rates))
    assert np.max(np.abs(grown.probs - scaled.probs)) <= 1e-12
    np.testing.assert_allclose(grown.probs, rates / rates.sum(), rtol=1e-14)


def test_apply_growth_keeps_absent_types_absent():
    q = Marginal([0.0, 1.0])
    assert apply_growth(q, GrowthProfile([3.0, 1.0])).probs.tolist() == [0.0, 1.0]


def test_zero_mass_vector_is_degenerate():
    with pytest.raises(DegenerateInputError):
        Marginal.from_vector([0.0, 0.0])


def test_growth_profile_rejects_nonpositive_rates():
    with pytest.raises(InputError):
        GrowthProfile([1.0, 0.0])
