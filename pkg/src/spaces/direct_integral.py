"""
Direct-integral Hilbert space H = ⊕_α H^α over a point-supported measure.

The measure weight μ({α}) enters only the global inner product; a fiber may
carry its own positive scalar metric g_α, ⟨u,v⟩_α = g_α Σ ū_j v_j
(g_α = 1 is the standard inner product). Sections are sparse: an atom
missing from the fiber map holds the zero vector.
"""
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from spaces.measure_space import AtomicMeasureSpace, IndexSet
from utils.errors import DimensionMismatch, LayoutMismatch


@dataclass(frozen=True)
class FiberLayout:
    space: AtomicMeasureSpace
    dims: tuple
    metrics: tuple = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != len(self.space):
            raise ValueError(f"{len(dims)} fiber dimensions for {len(self.space)} atoms")
        for atom, d in zip(self.space.atoms, dims):
            if d < 1:
                raise ValueError(f"fiber dimension at atom {atom!r} must be >= 1, got {d}")
        metrics = (1.0,) * len(dims) if self.metrics is None else tuple(float(g) for g in self.metrics)
        if len(metrics) != len(dims) or not all(g > 0 and math.isfinite(g) for g in metrics):
            raise ValueError("fiber metrics must be positive and finite, one per atom")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "metrics", metrics)

    def dim(self, atom) -> int:
        return self.dims[self.space.index(atom)]

    def metric(self, atom) -> float:
        return self.metrics[self.space.index(atom)]

    @property
    def total_dim(self) -> int:
        return sum(self.dims)

    def offsets(self) -> list:
        """Start offset of every fiber inside the flattened (atom-ordered) vector."""
        return list(np.concatenate([[0], np.cumsum(self.dims)[:-1]]).astype(int))


def make_layout(space: AtomicMeasureSpace, dims, metrics=None) -> FiberLayout:
    """dims/metrics may be sequences in atom order or maps atom -> value."""
    if isinstance(dims, Mapping):
        dims = [dims[a] for a in space.atoms]
    if isinstance(metrics, Mapping):
        metrics = [metrics.get(a, 1.0) for a in space.atoms]
    return FiberLayout(space, tuple(dims), None if metrics is None else tuple(metrics))


def _freeze(vec: np.ndarray) -> np.ndarray:
    vec = np.array(vec, dtype=complex).reshape(-1)
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True, eq=False)
class Section:
    layout: FiberLayout
    fiber: Mapping = field(default_factory=dict)

    def vector(self, atom) -> np.ndarray:
        """Fiber vector Φ(α); zeros when the atom is not stored."""
        vec = self.fiber.get(atom)
        if vec is None:
            return np.zeros(self.layout.dim(atom), dtype=complex)
        return vec

    def support(self) -> IndexSet:
        return IndexSet(frozenset(a for a, v in self.fiber.items() if np.any(v != 0)))

    def to_dense(self) -> np.ndarray:
        return np.concatenate([self.vector(a) for a in self.layout.space.atoms])

    def _combine(self, other: "Section", op) -> "Section":
        _same_layout(self, other)
        atoms = [a for a in self.layout.space.atoms if a in self.fiber or a in other.fiber]
        return Section(self.layout, {a: _freeze(op(self.vector(a), other.vector(a))) for a in atoms})

    def __add__(self, other: "Section") -> "Section":
        return self._combine(other, np.add)

    def __sub__(self, other: "Section") -> "Section":
        return self._combine(other, np.subtract)

    def __mul__(self, scalar) -> "Section":
        return Section(self.layout, {a: _freeze(scalar * v) for a, v in self.fiber.items()})

    __rmul__ = __mul__

    def __neg__(self) -> "Section":
        return self * -1.0


def _same_layout(phi: Section, psi: Section) -> None:
    if phi.layout is not psi.layout and phi.layout != psi.layout:
        raise LayoutMismatch("sections live on different fiber layouts")


def make_section(layout: FiberLayout, fibers: Mapping) -> Section:
    """Section from a map atom -> vector; validates atoms and fiber lengths."""
    stored = {}
    for atom in layout.space.atoms:
        if atom not in fibers:
            continue
        vec = _freeze(fibers[atom])
        if vec.shape[0] != layout.dim(atom):
            raise DimensionMismatch(atom, layout.dim(atom), vec.shape[0])
        stored[atom] = vec
    for atom in fibers:
        layout.space.index(atom)
    return Section(layout, stored)


def zero_section(layout: FiberLayout) -> Section:
    return Section(layout, {})


def from_dense(layout: FiberLayout, vec: Sequence[complex]) -> Section:
    vec = np.asarray(vec, dtype=complex).reshape(-1)
    if vec.shape[0] != layout.total_dim:
        raise ValueError(f"dense vector has length {vec.shape[0]}, layout needs {layout.total_dim}")
    fibers = {}
    for atom, start, d in zip(layout.space.atoms, layout.offsets(), layout.dims):
        fibers[atom] = vec[start:start + d]
    return make_section(layout, fibers)


def fiber_inner(layout: FiberLayout, atom, u: np.ndarray, v: np.ndarray) -> complex:
    """⟨u,v⟩_α, conjugate-linear in u."""
    return layout.metric(atom) * np.vdot(u, v)


def inner(phi: Section, psi: Section) -> complex:
    """Σ_α μ({α}) ⟨Φ(α),Ψ(α)⟩_α, summed in atom order."""
    _same_layout(phi, psi)
    layout = phi.layout
    terms = []
    for atom, w, g in zip(layout.space.atoms, layout.space.weights, layout.metrics):
        if atom in phi.fiber and atom in psi.fiber:
            terms.append(w * g * np.vdot(phi.fiber[atom], psi.fiber[atom]))
    re = math.fsum(t.real for t in terms)
    im = math.fsum(t.imag for t in terms)
    return complex(re, im)


def norm_squared(phi: Section) -> float:
    layout = phi.layout
    return math.fsum(w * g * float(np.vdot(phi.fiber[a], phi.fiber[a]).real)
                     for a, w, g in zip(layout.space.atoms, layout.space.weights, layout.metrics)
                     if a in phi.fiber)


def norm(phi: Section) -> float:
    return math.sqrt(norm_squared(phi))


def project(delta: IndexSet, phi: Section) -> Section:
    """P_Δ Φ: keep the fibers on Δ, zero elsewhere."""
    phi.layout.space.check(delta)
    return Section(phi.layout, {a: v for a, v in phi.fiber.items() if a in delta.members})


def extend_by_zero(fiber_vector, atom, layout: FiberLayout) -> Section:
    """Section supported on the single atom α with the given fiber vector."""
    vec = _freeze(fiber_vector)
    d = layout.dim(atom)
    if vec.shape[0] != d:
        raise DimensionMismatch(atom, d, vec.shape[0])
    return Section(layout, {atom: vec})


def sections_equal(phi: Section, psi: Section) -> bool:
    """Componentwise exact equality (absent fibers count as zero)."""
    _same_layout(phi, psi)
    return all(np.array_equal(phi.vector(a), psi.vector(a)) for a in phi.layout.space.atoms)


def to_pairs(phi: Section) -> list:
    """Serialisable [(atom, [[re, im], ...]), ...] in atom order."""
    return [[a, [[float(z.real), float(z.imag)] for z in phi.fiber[a]]]
            for a in phi.layout.space.atoms if a in phi.fiber]


def from_pairs(layout: FiberLayout, pairs) -> Section:
    fibers = {}
    for atom, entries in pairs:
        fibers[atom] = [complex(re, im) for re, im in entries]
    return make_section(layout, fibers)
