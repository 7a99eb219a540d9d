"""Seeded generators for models, sections, index sets, partitions and Borel sets."""
import math
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import unitary_group

from forms.quadratic_form import DirectIntegralForm, make_form
from forms.spectral import BorelSetSpec, Interval
from spaces.direct_integral import FiberLayout, Section, make_layout, make_section
from spaces.measure_space import AtomicMeasureSpace, IndexSet, Partition, make_space
from utils.errors import BadRange


class RandomModel(NamedTuple):
    space: AtomicMeasureSpace
    layout: FiberLayout
    form: DirectIntegralForm


def random_hermitian(rng: np.random.Generator, eigenvalues: Sequence[float]) -> np.ndarray:
    """U Λ U* with a Haar-random unitary U."""
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    d = len(eigenvalues)
    if d == 1:
        return eigenvalues.reshape(1, 1).astype(complex)
    u = unitary_group.rvs(d, random_state=rng)
    h = (u * eigenvalues) @ u.conj().T
    return (h + h.conj().T) / 2


def _force_straddle(rng: np.random.Generator, spectra: list, lo: float, hi: float) -> None:
    flat = [(i, j) for i, ev in enumerate(spectra) for j in range(len(ev))]
    values = np.concatenate(spectra)
    i_min, i_max = int(np.argmin(values)), int(np.argmax(values))
    if i_min == i_max:
        i_max = 1 if i_min == 0 else 0
    if values[i_min] >= 0:
        a, b = flat[i_min]
        spectra[a][b] = rng.uniform(lo, 0.0)
    if values[i_max] <= 0:
        a, b = flat[i_max]
        spectra[a][b] = hi - rng.uniform(0.0, hi)


def random_model(seed: int, n_atoms: int, max_dim: int, eig_range: Sequence[float] = (-10.0, 10.0)) -> RandomModel:
    """
    Weights log-uniform in [0.1, 10], fiber dimensions uniform in 1..max_dim,
    fiber eigenvalues uniform in eig_range. When eig_range straddles 0 (and
    there are at least two eigenvalues) the global spectrum does too.
    """
    lo, hi = float(eig_range[0]), float(eig_range[1])
    if n_atoms < 1 or max_dim < 1:
        raise BadRange(f"need n_atoms >= 1 and max_dim >= 1, got {n_atoms}, {max_dim}")
    if lo > hi:
        raise BadRange(f"empty eigenvalue range [{lo}, {hi}]")
    rng = np.random.default_rng(seed)
    weights = np.exp(rng.uniform(math.log(0.1), math.log(10.0), size=n_atoms))
    dims = rng.integers(1, max_dim + 1, size=n_atoms)
    spectra = [rng.uniform(lo, hi, size=int(d)) for d in dims]
    if lo < 0 < hi and int(dims.sum()) >= 2:
        _force_straddle(rng, spectra, lo, hi)
    matrices = [random_hermitian(rng, ev) for ev in spectra]

    space = make_space(list(range(n_atoms)), weights, None)
    layout = make_layout(space, [int(d) for d in dims])
    return RandomModel(space, layout, make_form(layout, matrices))


def random_section(rng: np.random.Generator, layout: FiberLayout, density: float = 1.0, scale: float = 1.0) -> Section:
    """Complex Gaussian fibers; each atom is kept with probability `density`."""
    fibers = {}
    for atom, d in zip(layout.space.atoms, layout.dims):
        vec = scale * (rng.normal(size=d) + 1j * rng.normal(size=d))
        if density >= 1.0 or rng.random() < density:
            fibers[atom] = vec
    return make_section(layout, fibers)


def random_index_set(rng: np.random.Generator, space: AtomicMeasureSpace, p: float = 0.5) -> IndexSet:
    keep = rng.random(len(space)) < p
    return IndexSet(frozenset(a for a, k in zip(space.atoms, keep) if k))


def random_partition(rng: np.random.Generator, space: AtomicMeasureSpace, delta: Optional[IndexSet] = None,
                     max_parts: int = 4) -> Partition:
    """Random partition of Δ (default: every atom) into at most max_parts parts; parts may be empty."""
    delta = space.all_atoms() if delta is None else delta
    members = space.ordered(delta)
    k = int(rng.integers(1, max_parts + 1))
    labels = rng.integers(0, k, size=len(members))
    parts = tuple(IndexSet(frozenset(a for a, lab in zip(members, labels) if lab == i)) for i in range(k))
    return Partition(delta, parts)


def random_borel_set(rng: np.random.Generator, lo: float, hi: float, max_intervals: int = 3) -> BorelSetSpec:
    """Disjoint random intervals inside [lo, hi] with random endpoint closedness."""
    m = int(rng.integers(1, max_intervals + 1))
    points = np.sort(rng.uniform(lo, hi, size=2 * m))
    closed = rng.random(size=2 * m) < 0.5
    intervals = [Interval(float(points[2 * i]), float(points[2 * i + 1]), bool(closed[2 * i]), bool(closed[2 * i + 1]))
                 for i in range(m)]
    return BorelSetSpec(tuple(intervals))
