"""
Evaluation-spike family: a non-closable quadratic form on refining grids.

Level n lives on the single cell [0, 1) sampled at n points with metric
h = 1/n; Φ_n is 1 on the first grid point, so ‖Φ_n‖² = 1/n, while the
form Q(Φ) = |Φ(first grid point)|² stays 1 on every level.
"""
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from forms.quadratic_form import ClosabilityVerdict, ProbeTolerances, closability_probe
from spaces.direct_integral import FiberLayout, Section, make_layout, make_section
from spaces.measure_space import counting_space
from utils.errors import BadRange
from utils.log import get_logger

log = get_logger("models")

CELL = 0


def refinement_layout(n: int) -> FiberLayout:
    return make_layout(counting_space([CELL], "single cell [0, 1)"), [n], [1.0 / n])


def point_evaluation(phi: Section) -> float:
    """Q(Φ) = |Φ(x_0)|² at the first grid point of whatever level Φ lives on."""
    return float(abs(phi.vector(CELL)[0]) ** 2)


def refine(phi: Section, n: int) -> Section:
    """Embed a piecewise-constant section into the grid of size n (a multiple of its own)."""
    d = phi.layout.dim(CELL)
    if n % d:
        raise BadRange(f"grid size {n} is not a refinement of {d}")
    return make_section(refinement_layout(n), {CELL: np.repeat(phi.vector(CELL), n // d)})


def common_difference(phi: Section, psi: Section) -> Section:
    """Φ - Ψ on the coarsest common refinement of both grids."""
    n = math.lcm(phi.layout.dim(CELL), psi.layout.dim(CELL))
    return refine(phi, n) - refine(psi, n)


@dataclass(frozen=True, eq=False)
class SpikeFamily:
    levels: tuple
    sections: tuple

    def quadratic(self, phi: Section) -> float:
        return point_evaluation(phi)

    def difference(self, phi: Section, psi: Section) -> Section:
        return common_difference(phi, psi)


def spike_sections(n_levels: int) -> SpikeFamily:
    if n_levels < 3:
        raise BadRange(f"spike family needs at least 3 levels, got {n_levels}")
    levels = tuple(range(1, n_levels + 1))
    sections = []
    for n in levels:
        fiber = np.zeros(n, dtype=complex)
        fiber[0] = 1.0
        sections.append(make_section(refinement_layout(n), {CELL: fiber}))
    return SpikeFamily(levels, tuple(sections))


def probe_tolerances(n_levels: int) -> ProbeTolerances:
    """Thresholds tuned to the spike family only: norm just above ‖Φ_n‖ = n^{-1/2}, Cauchy at rounding level."""
    return ProbeTolerances(norm=(1.0 + 1e-9) / math.sqrt(n_levels), cauchy=1e-12, value=0.5)


def spike_family(n_levels: int, tolerances: Optional[ProbeTolerances] = None) -> tuple:
    """(SpikeFamily, ClosabilityVerdict) from running the closability probe over every level."""
    family = spike_sections(n_levels)
    verdict: ClosabilityVerdict = closability_probe(family.quadratic, list(family.sections),
                                                    tolerances or probe_tolerances(n_levels),
                                                    difference=family.difference)
    log.info("spike family with %d levels: %s", n_levels, verdict.status)
    return family, verdict
