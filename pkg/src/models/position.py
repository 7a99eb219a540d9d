"""
Discretized position operator Q(Φ) = ∫ x |Φ(x)|² dx over the cells I_k = [k, k+1).

Atoms are the integers k (counting measure); the fiber over k samples
I_k at the midpoints x_{k,j} = k + (j + 1/2)/n and carries the quadrature
weight h = 1/n in its metric, so H_k = diag(x_{k,·}).
"""
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from forms.quadratic_form import DirectIntegralForm, eval_q, make_form
from forms.spectral import (EMPTY_SET, REAL_LINE, BorelSetSpec, closed_interval, decompose, dfin_witness, half_open,
                            resolution_apply, verify_representation)
from parameter import Tolerances, resolve
from spaces.direct_integral import FiberLayout, Section, make_layout, make_section, sections_equal
from spaces.measure_space import AtomicMeasureSpace, counting_space
from utils.errors import BadRange
from utils.log import get_logger

log = get_logger("models")


@dataclass(frozen=True, eq=False)
class PositionModel:
    k_min: int
    k_max: int
    n_per_cell: int
    space: AtomicMeasureSpace
    layout: FiberLayout
    form: DirectIntegralForm

    @property
    def h(self) -> float:
        return 1.0 / self.n_per_cell

    def grid(self, k: int) -> np.ndarray:
        """Midpoints x_{k,j} of the cell I_k."""
        return k + (np.arange(self.n_per_cell) + 0.5) / self.n_per_cell


def position_model(k_min: int, k_max: int, n_per_cell: int) -> PositionModel:
    if k_min > k_max:
        raise BadRange(f"k_min={k_min} exceeds k_max={k_max}")
    if n_per_cell < 1:
        raise BadRange(f"n_per_cell must be >= 1, got {n_per_cell}")
    cells = list(range(k_min, k_max + 1))
    space = counting_space(cells, f"integers truncated to [{k_min}, {k_max}]")
    layout = make_layout(space, [n_per_cell] * len(cells), [1.0 / n_per_cell] * len(cells))
    x = (np.arange(n_per_cell) + 0.5) / n_per_cell
    form = make_form(layout, [np.diag(k + x) for k in cells])
    return PositionModel(k_min, k_max, n_per_cell, space, layout, form)


def sampled_section(model: PositionModel, profile: Callable[[np.ndarray], np.ndarray]) -> Section:
    """Midpoint samples of a (vectorized) profile on every cell."""
    return make_section(model.layout, {k: profile(model.grid(k)) for k in model.space.atoms})


def indicator_section(model: PositionModel, lo: float, hi: float) -> Section:
    """Samples of the indicator of [lo, hi)."""
    fibers = {}
    for k in model.space.atoms:
        x = model.grid(k)
        mask = (x >= lo) & (x < hi)
        if mask.any():
            fibers[k] = mask.astype(complex)
    return make_section(model.layout, fibers)


def cell_bound(k: int) -> float:
    """|q_k(Φ^k)| ≤ max{|k|, |k+1|} ‖Φ^k‖²_k."""
    return float(max(abs(k), abs(k + 1)))


@dataclass(frozen=True)
class PositionCheckReport:
    verdicts: tuple
    max_rel_error: float
    resolution_exact: bool
    bound_ok: bool
    worst_bound_ratio: float

    @property
    def passed(self) -> bool:
        return (self.resolution_exact and self.bound_ok
                and all(v == "strong" for v in self.verdicts))


def default_samples(model: PositionModel, rng: np.random.Generator, count: int = 50) -> list:
    samples = [indicator_section(model, model.k_min, model.k_max + 1)]
    if model.k_min <= 0 <= model.k_max:
        samples.append(indicator_section(model, 0, 1))
    if model.k_min <= -1 <= model.k_max:
        samples.append(indicator_section(model, -1, 0))
    d = model.n_per_cell
    for _ in range(count):
        fibers = {k: rng.normal(size=d) + 1j * rng.normal(size=d) for k in model.space.atoms}
        samples.append(make_section(model.layout, fibers))
    return samples


def default_borel_sets(model: PositionModel) -> list:
    mid = (model.k_min + model.k_max + 1) / 2
    return [REAL_LINE, EMPTY_SET, half_open(0, 1), half_open(model.k_min, mid),
            closed_interval(-0.5, 0.5), BorelSetSpec(half_open(model.k_min, model.k_min + 0.25).intervals
                                                     + half_open(mid, model.k_max + 1).intervals)]


def position_spectral_check(model: PositionModel, samples: Optional[Sequence[Section]] = None,
                            sigmas: Optional[Sequence[BorelSetSpec]] = None, seed: int = 0,
                            tol: Optional[Tolerances] = None) -> PositionCheckReport:
    """
    Strong representation on every sample, E(σ) acting as the indicator of σ
    on grid points (exact equality) and the per-cell bound max{|k|,|k+1|}.
    """
    tol = resolve(tol)
    spectral = decompose(model.form, tol)
    samples = default_samples(model, np.random.default_rng(seed)) if samples is None else samples
    sigmas = default_borel_sets(model) if sigmas is None else sigmas

    verdicts, errors = [], []
    for phi in samples:
        report = verify_representation(spectral, phi, dfin_witness(spectral, phi), tol)
        verdicts.append(report.verdict)
        errors.append(report.rel_error)

    exact = True
    for sigma in sigmas:
        for phi in samples:
            expected = {}
            for k, v in phi.fiber.items():
                mask = np.array([sigma.contains(x) for x in model.grid(k)])
                if mask.any():
                    expected[k] = np.where(mask, v, 0)
            if not sections_equal(resolution_apply(spectral, sigma, phi), make_section(model.layout, expected)):
                exact = False

    bound_ok, worst = True, 0.0
    for phi in samples:
        for k, v in phi.fiber.items():
            x = model.grid(k)
            weight = model.h * np.abs(v) ** 2
            q_k = math.fsum(x * weight)
            mass = math.fsum(weight)
            if mass == 0:
                continue
            ratio = abs(q_k) / (cell_bound(k) * mass) if cell_bound(k) else 0.0
            worst = max(worst, ratio)
            if abs(q_k) > cell_bound(k) * mass * (1.0 + tol.relative):
                bound_ok = False

    report = PositionCheckReport(tuple(verdicts), max(errors, default=0.0), exact, bound_ok, worst)
    log.info("position model [%d, %d] n=%d: %d samples, max rel error %.2e, resolution exact %s",
             model.k_min, model.k_max, model.n_per_cell, len(samples), report.max_rel_error, exact)
    return report


def refinement_errors(profile: Callable[[np.ndarray], np.ndarray], exact: float, k_min: int, k_max: int,
                      levels: Sequence[int]) -> list:
    """|Q(Φ_n) - exact| for midpoint samples of a real profile at each grid size n."""
    out = []
    for n in levels:
        model = position_model(k_min, k_max, n)
        out.append(abs(eval_q(model.form, sampled_section(model, profile)) - exact))
    return out
