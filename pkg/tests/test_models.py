import math

import numpy as np
import pytest

from forms.quadratic_form import check_tail_vanishing, eval_q
from forms.spectral import decompose
from models.geometric import geometric_model, tail_bound
from models.position import indicator_section, position_model, position_spectral_check, refinement_errors
from models.random_model import (random_borel_set, random_hermitian, random_index_set, random_model,
                                 random_partition)
from models.spectral_partition import reverse_check, spectral_partition_model
from models.spike import CELL, common_difference, point_evaluation, refine, spike_family, spike_sections
from spaces.direct_integral import norm_squared
from spaces.measure_space import validate_partition
from utils.errors import BadRange, NonHermitianForm


# ---------- position operator ----------
@pytest.mark.parametrize("n", [1, 4, 16, 64])
def test_position_indicator_values(n):
    model = position_model(-2, 1, n)
    assert abs(eval_q(model.form, indicator_section(model, 0, 1)) - 0.5) <= 1e-13
    assert abs(eval_q(model.form, indicator_section(model, -1, 0)) + 0.5) <= 1e-13
    assert norm_squared(indicator_section(model, -1, 1)) == 2.0


@pytest.mark.parametrize("n", [1, 4, 16, 64])
def test_position_spectral_check(n):
    report = position_spectral_check(position_model(-2, 1, n), seed=n)
    assert report.passed
    assert report.max_rel_error <= 1e-12
    assert report.resolution_exact
    assert report.bound_ok and report.worst_bound_ratio <= 1.0
    assert len(report.verdicts) == 53


def test_position_midpoint_rule_converges():
    # ∫_0^2 x |sqrt(x)|^2 dx = 8/3; the midpoint error of x^2 scales exactly with h^2
    errors = refinement_errors(np.sqrt, 8.0 / 3.0, 0, 1, [1, 2, 4, 8])
    np.testing.assert_allclose(np.array(errors[:-1]) / np.array(errors[1:]), 4.0, rtol=1e-6)


def test_position_model_ranges():
    with pytest.raises(BadRange):
        position_model(2, 1, 4)
    with pytest.raises(BadRange):
        position_model(0, 1, 0)


# ---------- spike family ----------
def test_spike_family_is_a_closability_witness():
    family, verdict = spike_family(8)
    assert verdict.status == "violation"
    for n, phi in zip(family.levels, family.sections):
        assert norm_squared(phi) == 1.0 / n
        assert family.quadratic(phi) == 1.0
    assert all(d == 0.0 for _, _, d in verdict.witness.differences)
    assert len(verdict.witness.differences) == 8 * 7 // 2
    assert verdict.norm_trend and verdict.cauchy and verdict.nonvanishing


def test_spike_refinement():
    sections = spike_sections(3).sections
    fine = refine(sections[1], 4)
    np.testing.assert_array_equal(fine.vector(CELL), [1, 1, 0, 0])
    assert point_evaluation(common_difference(sections[1], sections[2])) == 0.0
    with pytest.raises(BadRange):
        refine(sections[1], 3)
    with pytest.raises(BadRange):
        spike_sections(2)


# ---------- geometric tails ----------
def test_geometric_tails_obey_the_bound():
    model = geometric_model(60)
    report = check_tail_vanishing(model.form, model.phi, model.tails(20))
    for n, value in enumerate(report.values, 1):
        assert value <= tail_bound(n)
        # |Σ_{k>=n} (-1)^k 2^-k| = 2^-n * 2/3
        assert value == pytest.approx(2.0 ** -n * 2.0 / 3.0, rel=1e-12)
    with pytest.raises(BadRange):
        geometric_model(-1)


# ---------- random generators ----------
def test_random_models_straddle_zero():
    for seed in range(10):
        model = random_model(seed, 6, 3)
        spectral = decompose(model.form)
        assert spectral.spectrum_min < 0 < spectral.spectrum_max
        assert all(0.1 <= w <= 10.0 for w in model.space.weights)
    with pytest.raises(BadRange):
        random_model(0, 0, 3)
    with pytest.raises(BadRange):
        random_model(0, 3, 3, (1.0, -1.0))


def test_random_models_are_reproducible():
    a, b = random_model(4, 5, 4), random_model(4, 5, 4)
    for ha, hb in zip(a.form.matrices, b.form.matrices):
        np.testing.assert_array_equal(ha, hb)


def test_random_hermitian_has_the_requested_spectrum(rng):
    h = random_hermitian(rng, [-2.0, 0.5, 3.0])
    np.testing.assert_allclose(np.linalg.eigvalsh(h), [-2.0, 0.5, 3.0], atol=1e-12)
    np.testing.assert_array_equal(h, h.conj().T)


def test_random_partitions_and_borel_sets(rng):
    model = random_model(1, 9, 2)
    for _ in range(20):
        delta = random_index_set(rng, model.space)
        assert validate_partition(random_partition(rng, model.space, delta))[0]
        sigma = random_borel_set(rng, -1.0, 1.0)
        assert 1 <= len(sigma.intervals) <= 3


# ---------- spectral partition (reverse direction) ----------
def test_spectral_partition_identities(rng):
    matrix = random_hermitian(rng, rng.uniform(-5.0, 5.0, size=8))
    model = spectral_partition_model(matrix)
    assert list(model.cells) == sorted({math.floor(x) for x in model.eigenvalues})
    space = model.form.layout.space
    vectors = [rng.normal(size=8) + 1j * rng.normal(size=8) for _ in range(20)]
    deltas = [random_index_set(rng, space) for _ in range(5)]
    partitions = [random_partition(rng, space) for _ in range(3)]
    report = reverse_check(model, vectors, deltas, partitions)
    assert report.quadratic_residual <= 1e-10
    assert report.projection_residual <= 1e-10
    assert report.moments_monotone and report.additivity_ok


def test_spectral_partition_rejects_non_hermitian():
    with pytest.raises(NonHermitianForm):
        spectral_partition_model([[0, 1], [0, 0]])
