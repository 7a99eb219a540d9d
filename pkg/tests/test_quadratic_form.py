import math

import numpy as np
import pytest

from forms.quadratic_form import (additivity_defect, check_finite_measure_bound, check_orthogonal_additivity,
                                  check_tail_vanishing, closability_probe, cross_term, csb_check, density,
                                  eval_q, eval_sesq, finite_measure_bound, make_form, omega_measure, polarize,
                                  sesquilinear, sigma_bound_check)
from forms.spectral import decompose, graph_norm_squared
from models.random_model import random_index_set, random_model, random_partition, random_section
from spaces.direct_integral import inner, make_layout, make_section, norm_squared, zero_section
from spaces.measure_space import IndexSet, Partition, index_set, make_space
from utils.errors import (DimensionMismatch, InvalidPartition, NonHermitianForm, NonNestedTails, OverlappingSets,
                          PreconditionViolated)


def _models(count, start=0):
    rng = np.random.default_rng(start)
    for seed in range(start, start + count):
        yield random_model(seed, int(rng.integers(1, 13)), int(rng.integers(1, 9))).form


def test_eval_q_on_small_form(small_form, small_section):
    # atom 0: <v, Hv> = -3 (weight 1); atom 1: 2 * 3 * |2|^2 = 24
    assert eval_q(small_form, small_section) == pytest.approx(21.0)
    assert small_form(small_section) == eval_q(small_form, small_section)


def test_single_negative_atom():
    layout = make_layout(make_space(["a"], [2.5]), [1])
    form = make_form(layout, [[[-1.0]]])
    assert eval_q(form, make_section(layout, {"a": [2.0]})) == -10.0


def test_non_hermitian_matrix_is_rejected():
    layout = make_layout(make_space([0, 1], [1, 1]), [1, 2])
    with pytest.raises(NonHermitianForm) as exc:
        make_form(layout, [[[1]], [[0, 1], [0, 0]]])
    assert exc.value.atom == 1


def test_wrong_fiber_matrix_shape_is_rejected():
    layout = make_layout(make_space([0], [1]), [2])
    with pytest.raises(DimensionMismatch):
        make_form(layout, [[[1, 0, 0], [0, 1, 0], [0, 0, 1]]])


def test_polarization_matches_sesquilinear_form(rng):
    triples = 0
    for form in _models(10):
        for _ in range(10):
            phi, psi = random_section(rng, form.layout), random_section(rng, form.layout)
            direct = eval_sesq(form, phi, psi)
            recovered = polarize(form, phi, psi)
            assert abs(direct - recovered) <= 1e-11 * (1.0 + abs(direct))
            assert eval_sesq(form, phi, phi).real == pytest.approx(eval_q(form, phi))
            triples += 1
    assert triples == 100


def test_black_box_sesquilinear_uses_polarization(small_form, small_section, rng):
    psi = random_section(rng, small_form.layout)
    box = lambda phi: eval_q(small_form, phi)  # noqa: E731
    assert sesquilinear(box, small_section, psi) == pytest.approx(eval_sesq(small_form, small_section, psi))


def test_orthogonal_additivity(rng):
    worst = 0.0
    for form in _models(50, start=100):
        space = form.layout.space
        for _ in range(10):
            phi = random_section(rng, form.layout, density=0.8)
            verdict = check_orthogonal_additivity(form, phi, random_partition(rng, space, random_index_set(rng, space)))
            assert verdict.passed
            worst = max(worst, verdict.residual / (1.0 + abs(verdict.whole)))
    assert worst <= 1e-11


def test_cross_terms_over_disjoint_sets_vanish(rng):
    for form in _models(20):
        space = form.layout.space
        d1 = random_index_set(rng, space)
        d2 = IndexSet(space.all_atoms().members - d1.members)
        value = cross_term(form, d1, d2, random_section(rng, form.layout), random_section(rng, form.layout))
        assert abs(value) <= 1e-12


def test_cross_term_requires_disjoint_sets(small_form, small_section):
    with pytest.raises(OverlappingSets):
        cross_term(small_form, index_set([0]), index_set([0, 1]), small_section, small_section)


def test_invalid_partition_is_rejected(small_form, small_section):
    bad = Partition(index_set([0, 1]), (index_set([0]),))
    with pytest.raises(InvalidPartition):
        check_orthogonal_additivity(small_form, small_section, bad)


def test_non_additive_provider_is_flagged(small_form, small_section):
    def quartic(phi):
        return norm_squared(phi) ** 2

    parts = Partition(index_set([0, 1]), (index_set([0]), index_set([1])))
    verdict = check_orthogonal_additivity(quartic, small_section, parts)
    assert not verdict.passed
    # 10^2 - (2^2 + 8^2)
    assert verdict.residual == pytest.approx(32.0)
    assert additivity_defect(quartic, small_section, index_set([0]), index_set([1])) == pytest.approx(32.0)


def test_additivity_defect_is_twice_the_real_cross_term(small_form, rng):
    phi = random_section(rng, small_form.layout)
    d1, d2 = index_set([0]), index_set([1])
    defect = additivity_defect(small_form, phi, d1, d2)
    assert defect == pytest.approx(2.0 * cross_term(small_form, d1, d2, phi, phi).real, abs=1e-12)


def test_omega_obeys_the_parallelogram_identity(rng):
    for form in _models(20, start=500):
        for _ in range(20):
            phi, psi = random_section(rng, form.layout), random_section(rng, form.layout)
            plus, minus = omega_measure(form, phi + psi), omega_measure(form, phi - psi)
            lhs = np.add(plus.values, minus.values)
            rhs = 2.0 * np.add(omega_measure(form, phi).values, omega_measure(form, psi).values)
            np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1.0 + np.max(np.abs(rhs))))


def test_nonlocal_provider_has_cross_terms(small_form, small_section):
    # Q(Φ) = |⟨e, Φ⟩|² couples both atoms, so disjoint pieces interact
    e = make_section(small_form.layout, {0: [1, 0], 1: [1]})

    def rank_one(phi):
        return abs(inner(e, phi)) ** 2

    d1, d2 = index_set([0]), index_set([1])
    # ⟨e, P_0Φ⟩ = 1 and ⟨e, P_1Φ⟩ = 2 * 2 = 4
    value = cross_term(rank_one, d1, d2, small_section, small_section)
    assert value == pytest.approx(4.0)
    defect = additivity_defect(rank_one, small_section, d1, d2)
    assert defect == pytest.approx(8.0)
    assert defect == pytest.approx(2.0 * value.real)
    parts = Partition(index_set([0, 1]), (d1, d2))
    assert not check_orthogonal_additivity(rank_one, small_section, parts).passed


def test_omega_measure_and_density(small_form, small_section):
    omega = omega_measure(small_form, small_section)
    assert omega.values == pytest.approx((-3.0, 24.0))
    assert omega.total_variation == pytest.approx(27.0)
    assert omega.of(index_set([0, 1])) == pytest.approx(eval_q(small_form, small_section))
    rho = density(small_form, small_section)
    assert rho == pytest.approx({0: -3.0, 1: 12.0})


def test_sigma_boundedness(rng):
    for form in _models(50, start=200):
        space = form.layout.space
        phi = random_section(rng, form.layout)
        passed, largest, bound = sigma_bound_check(form, phi, [random_index_set(rng, space) for _ in range(200)])
        assert passed
        assert largest <= bound + 1e-10


def test_finite_measure_bound(small_form, rng):
    # spectral radii: atom 0 has eigenvalues (-1 ± sqrt 5)/2, atom 1 has 3
    assert finite_measure_bound(small_form, index_set([0])) == pytest.approx((1 + math.sqrt(5)) / 2)
    assert finite_measure_bound(small_form, index_set([0, 1])) == pytest.approx(3.0)
    assert finite_measure_bound(small_form, IndexSet()) == 0.0
    passed, ratio = check_finite_measure_bound(small_form, index_set([0, 1]),
                                               [random_section(rng, small_form.layout) for _ in range(20)])
    assert passed and ratio <= 1.0 + 1e-12


def test_tail_sequence_and_nesting(small_form, small_section):
    tails = [index_set([0, 1]), index_set([1]), IndexSet()]
    report = check_tail_vanishing(small_form, small_section, tails)
    assert report.values == pytest.approx((21.0, 24.0, 0.0))
    assert report.below_tolerance and report.first_below == 2
    with pytest.raises(NonNestedTails) as exc:
        check_tail_vanishing(small_form, small_section, [index_set([1]), index_set([0])])
    assert exc.value.index == 1


def test_generalized_cauchy_schwarz_with_graph_norm(rng):
    form = random_model(5, 8, 4).form
    spectral = decompose(form)
    h = lambda phi: graph_norm_squared(spectral, phi)  # noqa: E731
    samples = [(random_section(rng, form.layout), random_section(rng, form.layout)) for _ in range(500)]
    verdict = csb_check(form, h, 1.0, samples)
    assert verdict.passed and verdict.failures == 0
    assert verdict.worst_excess <= 1e-10


def test_csb_degenerate_branch_passes(small_form, small_section):
    zero = zero_section(small_form.layout)
    verdict = csb_check(small_form, lambda phi: 30.0 * norm_squared(phi), 1.0, [(zero, small_section)])
    assert verdict.passed


def test_csb_precondition_names_the_section(small_form, small_section):
    zero = zero_section(small_form.layout)
    with pytest.raises(PreconditionViolated) as exc:
        csb_check(small_form, norm_squared, 1.0, [(zero, zero), (zero, small_section)])
    assert exc.value.index == 3


def test_scaled_sequence_is_consistent_with_closability(small_form, small_section):
    verdict = closability_probe(small_form, [small_section * (1.0 / n) for n in range(1, 9)])
    assert verdict.status == "consistent"
    assert verdict.witness is None


def test_closability_probe_needs_a_sequence(small_form):
    with pytest.raises(ValueError):
        closability_probe(small_form, [])
