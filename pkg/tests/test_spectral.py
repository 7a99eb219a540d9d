import math

import numpy as np
import pytest

from forms.quadratic_form import eval_q, make_form
from forms.spectral import (EMPTY_SET, REAL_LINE, BorelSetSpec, Interval, apply_T, borel_set, closed_interval,
                            commute_check, decompose, dfin_approximation, dfin_witness, eigen_table, fiber_measure,
                            global_measure, graph_norm_squared, half_open, in_domain_T, is_in_DFin, mass_in,
                            moments, norm_equivalence_check, resolution_apply, restrict, spectrum_summary,
                            verify_representation)
from models.random_model import random_borel_set, random_index_set, random_model, random_section
from spaces.direct_integral import inner, make_layout, make_section, norm, norm_squared, project, sections_equal
from spaces.measure_space import IndexSet, index_set, make_space
from utils.errors import NotSemibounded, OverlappingIntervals, SemiboundViolation


def _random_models(count, start=0):
    rng = np.random.default_rng(start)
    for seed in range(start, start + count):
        yield random_model(seed, int(rng.integers(1, 13)), int(rng.integers(1, 9)))


# ---------- Borel sets ----------
def test_interval_membership():
    iv = Interval(0.0, 1.0, True, False)
    assert iv.contains(0.0) and not iv.contains(1.0) and iv.contains(0.5)
    assert Interval(1.0, 1.0, True, False).is_empty()
    assert not Interval(1.0, 1.0).is_empty()
    with pytest.raises(ValueError):
        Interval(2.0, 1.0)


def test_infinite_endpoints_are_open():
    iv = Interval(-math.inf, 0.0, True, True)
    assert not iv.lo_closed and not iv.is_compact()
    assert not REAL_LINE.is_compact() and EMPTY_SET.is_compact()


def test_borel_set_rejects_overlaps():
    with pytest.raises(OverlappingIntervals):
        borel_set((0, 2), (1, 3))
    with pytest.raises(OverlappingIntervals):
        borel_set((0, 1), (1, 2))
    touching = half_open(0, 1).union(half_open(1, 2))
    assert touching.contains(1.0) and not touching.contains(2.0)
    assert [iv.lo for iv in borel_set((5, 6), (0, 1)).intervals] == [0, 5]


# ---------- decomposition ----------
def test_decompose_records_semibounds(small_form):
    model = decompose(small_form)
    lo, hi, m_below, m_above = spectrum_summary(model)
    assert lo == pytest.approx((-1 - math.sqrt(5)) / 2)
    assert hi == pytest.approx(3.0)
    assert m_below == pytest.approx(lo)
    assert m_above == pytest.approx(6.0)
    assert model.semibounds()[0] == pytest.approx(-lo)
    assert model.semibounds()[1] == 0.0
    assert eigen_table(model)[1] == [1, [3.0]]


def test_declared_semibound_is_verified():
    layout = make_layout(make_space([0], [1.0]), [1])
    form = make_form(layout, [[[-1.0]]], semibound_info=[(0.0, 5.0)])
    with pytest.raises(SemiboundViolation) as exc:
        decompose(form)
    assert exc.value.atom == 0


def test_parallel_decomposition_matches_serial():
    form = random_model(3, 12, 6).form
    serial, parallel = decompose(form), decompose(form, workers=4)
    for a, b in zip(serial.fibers, parallel.fibers):
        np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)


def test_diagonal_fibers_use_the_standard_basis():
    layout = make_layout(make_space(["x"], [1.0]), [3])
    model = decompose(make_form(layout, [np.diag([2.0, -1.0, 2.0])]))
    fiber = model.fiber("x")
    np.testing.assert_array_equal(fiber.eigenvalues, [-1.0, 2.0, 2.0])
    assert fiber.clusters == ((0, 1), (1, 3))
    assert fiber.cluster_values() == [-1.0, 2.0]
    nu = fiber_measure(model, "x", make_section(layout, {"x": [1, 1, 1j]}))
    assert nu.atoms == ((-1.0, 1.0), (2.0, 2.0))


# ---------- spectral measures ----------
def test_global_measure_mass_and_first_moment(rng):
    for model_data in _random_models(10):
        spectral = decompose(model_data.form)
        phi = random_section(rng, model_data.layout)
        nu = global_measure(spectral, phi)
        assert nu.total_mass == pytest.approx(norm_squared(phi), rel=1e-12)
        assert mass_in(nu, REAL_LINE) == pytest.approx(nu.total_mass)
        assert moments(nu)[0] == pytest.approx(eval_q(model_data.form, phi), rel=1e-10, abs=1e-10)
        sigma = random_borel_set(rng, -10, 10)
        assert restrict(nu, sigma).total_mass == pytest.approx(mass_in(nu, sigma))


def test_empty_section_has_zero_measure(small_form):
    spectral = decompose(small_form)
    nu = global_measure(spectral, make_section(small_form.layout, {}))
    assert len(nu) == 0 and nu.total_mass == 0.0
    assert moments(nu) == (0.0, 0.0, 0.0)


def test_resolution_of_the_identity(rng):
    model_data = random_model(11, 8, 5)
    spectral = decompose(model_data.form)
    phi = random_section(rng, model_data.layout)
    assert sections_equal(resolution_apply(spectral, REAL_LINE, phi), phi)
    assert norm(resolution_apply(spectral, EMPTY_SET, phi)) == 0.0
    for _ in range(10):
        sigma = random_borel_set(rng, -10, 10)
        once = resolution_apply(spectral, sigma, phi)
        twice = resolution_apply(spectral, sigma, once)
        assert norm(twice - once) <= 1e-12 * (1.0 + norm(phi))
        delta = random_index_set(rng, model_data.space)
        assert commute_check(spectral, sigma, delta, phi) <= 1e-14 * (1.0 + norm(phi))
        assert norm_squared(once) == pytest.approx(mass_in(global_measure(spectral, phi), sigma), rel=1e-12, abs=1e-12)


def test_apply_T_reproduces_the_form(rng):
    model_data = random_model(12, 6, 4)
    spectral = decompose(model_data.form)
    phi = random_section(rng, model_data.layout)
    value = inner(phi, apply_T(spectral, phi))
    assert value.real == pytest.approx(eval_q(model_data.form, phi))
    assert abs(value.imag) <= 1e-10 * (1.0 + abs(value.real))
    assert in_domain_T(spectral, phi)
    assert not in_domain_T(spectral, phi, threshold=0.0)


# ---------- representation ----------
def test_representation_identity_on_random_models(rng):
    count = 0
    for model_data in _random_models(20, start=300):
        spectral = decompose(model_data.form)
        for _ in range(100):
            phi = random_section(rng, model_data.layout, density=0.9)
            report = verify_representation(spectral, phi, dfin_witness(spectral, phi))
            assert report.rel_error <= 1e-10
            assert abs(report.q_spectral - report.q_global_spectral) <= 1e-10 * (1.0 + abs(report.q_spectral))
            assert report.verdict == "strong"
            count += 1
    assert count == 2000


def test_verdicts(small_form, small_section):
    spectral = decompose(small_form)
    assert verify_representation(spectral, small_section).verdict == "weak"
    assert verify_representation(spectral, small_section, dfin_witness(spectral, small_section)).verdict == "strong"
    # σ too small: E(σ)Φ != Φ
    bad = (index_set([0, 1]), closed_interval(2.0, 4.0))
    assert verify_representation(spectral, small_section, bad).verdict == "fail"


def test_dfin_membership(small_form, small_section):
    spectral = decompose(small_form)
    delta, sigma = dfin_witness(spectral, small_section)
    assert is_in_DFin(spectral, small_section, delta, sigma)
    assert not is_in_DFin(spectral, small_section, delta, REAL_LINE)
    assert not is_in_DFin(spectral, small_section, index_set([0]), sigma)
    assert not is_in_DFin(spectral, small_section, index_set([0, 1, "z"]), sigma)
    part = project(index_set([1]), small_section)
    assert is_in_DFin(spectral, part, index_set([1]), closed_interval(3.0, 3.0))


def test_dfin_approximation_converges(rng):
    model_data = random_model(21, 10, 4)
    spectral = decompose(model_data.form)
    for _ in range(5):
        steps = dfin_approximation(spectral, random_section(rng, model_data.layout, density=0.7), 5)
        distances = [s.distance for s in steps]
        graph = [s.graph_distance for s in steps]
        assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(distances, distances[1:]))
        assert all(b <= a * (1 + 1e-12) + 1e-15 for a, b in zip(graph, graph[1:]))
        assert distances[-1] == 0.0 and graph[-1] == 0.0
    with pytest.raises(ValueError):
        dfin_approximation(spectral, random_section(rng, model_data.layout), 0)


# ---------- graph norm and semibounds ----------
def test_graph_norm_dominates_the_form(rng):
    model_data = random_model(31, 8, 4)
    spectral = decompose(model_data.form)
    for _ in range(20):
        phi = random_section(rng, model_data.layout)
        h = graph_norm_squared(spectral, phi)
        assert h >= norm_squared(phi)
        assert abs(eval_q(model_data.form, phi)) <= h * (1 + 1e-12)


def test_norm_equivalence_on_semibounded_models(rng):
    for model_data in _random_models(20, start=400):
        spectral = decompose(model_data.form)
        m = max(0.0, -spectral.spectrum_min)
        samples = [random_section(rng, model_data.layout) for _ in range(100)]
        verdict = norm_equivalence_check(spectral, m, samples)
        assert verdict.passed
        assert verdict.worst_upper <= 1.0 + 1e-10
        assert verdict.worst_lower <= 1.0 + 1e-10


def test_norm_equivalence_rejects_a_too_small_semibound(small_form, small_section):
    spectral = decompose(small_form)
    with pytest.raises(NotSemibounded):
        norm_equivalence_check(spectral, 1.0, [small_section])
    with pytest.raises(ValueError):
        norm_equivalence_check(spectral, -1.0, [small_section])


def test_index_sets_pick_fibers(small_form, small_section):
    spectral = decompose(small_form)
    nu = global_measure(spectral, project(IndexSet(frozenset([1])), small_section))
    # weight 2, fiber mass |2|^2 at eigenvalue 3
    assert nu.atoms == ((3.0, 8.0),)
    assert isinstance(closed_interval(0, 1), BorelSetSpec)


# ---------- projection-valued measure ----------
def test_resolution_is_additive_on_disjoint_sets(rng):
    model_data = random_model(13, 8, 5)
    spectral = decompose(model_data.form)
    for _ in range(20):
        phi = random_section(rng, model_data.layout)
        lo, cut, hi = np.sort(rng.uniform(-10.5, 10.5, size=3))
        left, right = half_open(lo, cut), half_open(cut, hi)
        whole = resolution_apply(spectral, left.union(right), phi)
        parts = resolution_apply(spectral, left, phi) + resolution_apply(spectral, right, phi)
        assert norm(whole - parts) <= 1e-12 * (1.0 + norm(phi))
        assert inner(resolution_apply(spectral, left, phi), resolution_apply(spectral, right, phi)) == pytest.approx(
            0.0, abs=1e-12 * (1.0 + norm_squared(phi)))


def test_restricted_measure_is_the_weighted_fiber_sum(rng):
    model_data = random_model(14, 9, 4)
    spectral = decompose(model_data.form)
    space = model_data.space
    for _ in range(20):
        phi = random_section(rng, model_data.layout)
        delta = random_index_set(rng, space)
        sigma = random_borel_set(rng, -10, 10)
        expected = math.fsum(space.weight(a) * mass_in(fiber_measure(spectral, a, phi), sigma)
                             for a in space.ordered(delta))
        assert mass_in(global_measure(spectral, project(delta, phi)), sigma) == pytest.approx(
            expected, rel=1e-12, abs=1e-14)


# ---------- closed-form references ----------
def _single_fiber(matrix):
    layout = make_layout(make_space(["x"], [1.0]), [len(matrix)])
    return decompose(make_form(layout, [matrix])), layout


def test_swap_matrix_eigendecomposition():
    spectral, _ = _single_fiber([[0, 1], [1, 0]])
    fiber = spectral.fiber("x")
    np.testing.assert_allclose(fiber.eigenvalues, [-1.0, 1.0], atol=1e-15)
    s = 1.0 / math.sqrt(2.0)
    # eigenvectors are fixed up to a phase
    assert abs(np.vdot(fiber.eigenvectors[:, 0], [s, -s])) == pytest.approx(1.0)
    assert abs(np.vdot(fiber.eigenvectors[:, 1], [s, s])) == pytest.approx(1.0)


def test_swap_matrix_fiber_measure_of_e1():
    spectral, layout = _single_fiber([[0, 1], [1, 0]])
    nu = fiber_measure(spectral, "x", make_section(layout, {"x": [1, 0]}))
    assert [lam for lam, _ in nu.atoms] == pytest.approx([-1.0, 1.0])
    assert [w for _, w in nu.atoms] == pytest.approx([0.5, 0.5], abs=1e-15)
    assert nu.total_mass == pytest.approx(1.0)


def test_graph_norm_of_a_diagonal_fiber():
    spectral, layout = _single_fiber(np.diag([-1.0, 2.0]))
    phi = make_section(layout, {"x": [1, 1]})
    # ‖Φ‖² = 2 plus ∫|λ| dν = 1 + 2
    assert graph_norm_squared(spectral, phi) == 5.0
    assert eval_q(spectral.form, phi) == 1.0


def test_norm_equivalence_for_a_symmetric_spectrum():
    spectral, layout = _single_fiber(np.diag([-1.0, 1.0]))
    samples = [make_section(layout, {"x": v}) for v in ([1, 0], [0, 1], [1, 1])]
    verdict = norm_equivalence_check(spectral, 1.0, samples)
    assert verdict.passed
    # (|a|² + 3|b|²) / (4(|a|² + |b|²)) peaks at e2; 2(|a|² + |b|²) / (3(|a|² + 3|b|²)) at e1
    assert verdict.worst_upper == pytest.approx(0.75)
    assert verdict.worst_lower == pytest.approx(2.0 / 3.0)


def test_reconstruction_residual_on_random_hermitian_fibers(rng):
    worst = 0.0
    for _ in range(100):
        a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
        spectral, _ = _single_fiber((a + a.conj().T) / 2)
        fiber = spectral.fiber("x")
        u = fiber.eigenvectors
        independent = float(np.max(np.abs(u @ np.diag(fiber.eigenvalues) @ u.conj().T - (a + a.conj().T) / 2)))
        worst = max(worst, fiber.reconstruction_residual, independent)
    assert worst <= 1e-9
