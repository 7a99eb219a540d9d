"""
Spectral representation of a direct-integral form.

decompose() eigendecomposes every fiber matrix once; every later query
(fiber and global spectral measures, the resolution of the identity E(σ),
the operator T, D_Fin membership, graph norms and the representation
verdict) is a pure read of the resulting SpectralModel.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from forms.quadratic_form import DirectIntegralForm, eval_q
from parameter import Tolerances, resolve
from spaces.direct_integral import FiberLayout, Section, _freeze, norm, norm_squared, project
from spaces.measure_space import IndexSet
from utils.errors import EigenFailure, LayoutMismatch, NotSemibounded, OverlappingIntervals, SemiboundViolation
from utils.log import get_logger

log = get_logger("spectral")

# weights at the square of rounding level are treated as zero
_NEGLIGIBLE_WEIGHT = 1e-20


# ---------- Borel sets ----------
@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if math.isnan(self.lo) or math.isnan(self.hi) or self.lo > self.hi:
            raise ValueError(f"bad interval endpoints ({self.lo}, {self.hi})")
        # infinite endpoints are never attained
        if math.isinf(self.lo):
            object.__setattr__(self, "lo_closed", False)
        if math.isinf(self.hi):
            object.__setattr__(self, "hi_closed", False)

    def contains(self, x: float) -> bool:
        above = x > self.lo or (self.lo_closed and x == self.lo)
        below = x < self.hi or (self.hi_closed and x == self.hi)
        return above and below

    def is_empty(self) -> bool:
        return self.lo == self.hi and not (self.lo_closed and self.hi_closed)

    def is_compact(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo_closed and self.hi_closed


@dataclass(frozen=True)
class BorelSetSpec:
    """Finite union of pairwise disjoint intervals."""
    intervals: tuple = ()

    def __post_init__(self):
        kept = sorted((iv for iv in self.intervals if not iv.is_empty()), key=lambda iv: (iv.lo, not iv.lo_closed))
        for a, b in zip(kept, kept[1:]):
            if b.lo < a.hi or (b.lo == a.hi and a.hi_closed and b.lo_closed):
                raise OverlappingIntervals(f"intervals ({a.lo}, {a.hi}) and ({b.lo}, {b.hi}) overlap")
        object.__setattr__(self, "intervals", tuple(kept))

    def contains(self, x: float) -> bool:
        return any(iv.contains(x) for iv in self.intervals)

    def is_compact(self) -> bool:
        return all(iv.is_compact() for iv in self.intervals)

    def union(self, other: "BorelSetSpec") -> "BorelSetSpec":
        return BorelSetSpec(self.intervals + other.intervals)


REAL_LINE = BorelSetSpec((Interval(-math.inf, math.inf, False, False),))
EMPTY_SET = BorelSetSpec(())


def closed_interval(lo: float, hi: float) -> BorelSetSpec:
    return BorelSetSpec((Interval(lo, hi, True, True),))


def half_open(lo: float, hi: float) -> BorelSetSpec:
    """[lo, hi), the convention of the cells I_k = [k, k+1)."""
    return BorelSetSpec((Interval(lo, hi, True, False),))


def borel_set(*intervals) -> BorelSetSpec:
    """borel_set((lo, hi, lo_closed, hi_closed), ...)."""
    return BorelSetSpec(tuple(iv if isinstance(iv, Interval) else Interval(*iv) for iv in intervals))


# ---------- fiber decomposition ----------
@dataclass(frozen=True, eq=False)
class FiberSpectralData:
    atom: object
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    reconstruction_residual: float
    clusters: tuple  # (start, stop) ranges of numerically equal eigenvalues

    def cluster_values(self) -> list:
        """One representative eigenvalue per cluster: the plain mean, exact for singletons."""
        out = []
        for start, stop in self.clusters:
            block = self.eigenvalues[start:stop]
            out.append(float(block[0]) if stop - start == 1 or np.all(block == block[0]) else float(np.mean(block)))
        return out


def _clusters(eigenvalues: np.ndarray, tol: Tolerances) -> tuple:
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    bounds = [0]
    for i in range(1, len(eigenvalues)):
        if eigenvalues[i] - eigenvalues[i - 1] > tol.cluster * scale:
            bounds.append(i)
    bounds.append(len(eigenvalues))
    return tuple(zip(bounds[:-1], bounds[1:]))


def _decompose_fiber(atom, h: np.ndarray, tol: Tolerances) -> FiberSpectralData:
    d = h.shape[0]
    if np.array_equal(h, np.diag(np.diag(h))):
        # diagonal fibers: eigenbasis is a permutation of the standard basis
        diag = np.diag(h).real
        order = np.argsort(diag, kind="stable")
        eigenvalues = diag[order]
        eigenvectors = np.eye(d, dtype=complex)[:, order]
        residual = 0.0
    else:
        try:
            eigenvalues, eigenvectors = scipy.linalg.eigh(h)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise EigenFailure(atom, f"({e})") from e
        unitarity = float(np.max(np.abs(eigenvectors.conj().T @ eigenvectors - np.eye(d))))
        if unitarity > tol.unitarity:
            raise EigenFailure(atom, f"(eigenvectors not unitary, residual {unitarity:.3e})")
        residual = float(np.max(np.abs((eigenvectors * eigenvalues) @ eigenvectors.conj().T - h)))
        if residual > tol.eigen_reconstruction * (1.0 + float(np.max(np.abs(h)))):
            raise EigenFailure(atom, f"(reconstruction residual {residual:.3e})")
    eigenvalues = np.asarray(eigenvalues, dtype=float)
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    log.debug("fiber %r: dim %d, residual %.2e", atom, d, residual)
    return FiberSpectralData(atom, eigenvalues, eigenvectors, residual, _clusters(eigenvalues, tol))


@dataclass(frozen=True, eq=False)
class SpectralModel:
    form: DirectIntegralForm
    fibers: tuple
    m_below: float
    m_above: float
    spectrum_min: float
    spectrum_max: float

    @property
    def layout(self) -> FiberLayout:
        return self.form.layout

    def fiber(self, atom) -> FiberSpectralData:
        return self.fibers[self.layout.space.index(atom)]

    def semibounds(self) -> dict:
        """m_α = -min(0, λ_min(μ({α}) H_α)) for every atom."""
        space = self.layout.space
        return {a: -min(0.0, w * float(f.eigenvalues[0])) for a, w, f in zip(space.atoms, space.weights, self.fibers)}


def decompose(form: DirectIntegralForm, tol: Optional[Tolerances] = None, workers: int = 1) -> SpectralModel:
    """Eigendecompose every fiber; independent fibers run on a thread pool when workers > 1."""
    tol = resolve(tol)
    space = form.layout.space
    jobs = list(zip(space.atoms, form.matrices))
    if workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            fibers = list(executor.map(lambda job: _decompose_fiber(job[0], job[1], tol), jobs))
    else:
        fibers = [_decompose_fiber(atom, h, tol) for atom, h in jobs]

    for atom, w, f in zip(space.atoms, space.weights, fibers):
        actual = w * float(f.eigenvalues[0])
        declared = form.semibound(atom).lower
        if declared > actual + tol.eigen_reconstruction * (1.0 + abs(actual)):
            raise SemiboundViolation(atom, declared, actual)

    weighted_min = [w * float(f.eigenvalues[0]) for w, f in zip(space.weights, fibers)]
    weighted_max = [w * float(f.eigenvalues[-1]) for w, f in zip(space.weights, fibers)]
    model = SpectralModel(form, tuple(fibers),
                          m_below=min(weighted_min), m_above=max(weighted_max),
                          spectrum_min=min(float(f.eigenvalues[0]) for f in fibers),
                          spectrum_max=max(float(f.eigenvalues[-1]) for f in fibers))
    log.info("decomposed %d fibers, spectrum in [%.6g, %.6g]", len(fibers), model.spectrum_min, model.spectrum_max)
    return model


def spectrum_summary(model: SpectralModel) -> tuple:
    """(spectrum_min, spectrum_max, m_below, m_above)."""
    return model.spectrum_min, model.spectrum_max, model.m_below, model.m_above


def eigen_table(model: SpectralModel) -> list:
    return [[f.atom, [float(x) for x in f.eigenvalues]] for f in model.fibers]


# ---------- spectral measures ----------
@dataclass(frozen=True)
class AtomicSpectralMeasure:
    atoms: tuple  # ((λ, w), ...) sorted by λ
    total_mass: float

    def __len__(self) -> int:
        return len(self.atoms)


def _measure(pairs) -> AtomicSpectralMeasure:
    pairs = tuple((float(lam), float(w)) for lam, w in pairs)
    return AtomicSpectralMeasure(pairs, math.fsum(w for _, w in pairs))


def _check_model_layout(model: SpectralModel, phi: Section) -> None:
    if phi.layout is not model.layout and phi.layout != model.layout:
        raise LayoutMismatch("section layout differs from the model layout")


def fiber_measure(model: SpectralModel, atom, phi: Section) -> AtomicSpectralMeasure:
    """ν^α_Φ: atoms (λ, ‖E^α({λ})Φ(α)‖²_α), one per eigenvalue cluster."""
    data = model.fiber(atom)
    v = phi.fiber.get(atom)
    if v is None:
        return _measure(())
    g = model.layout.metric(atom)
    weights = g * np.abs(data.eigenvectors.conj().T @ v) ** 2
    mass = float(np.sum(weights))
    pairs = []
    for (start, stop), lam in zip(data.clusters, data.cluster_values()):
        w = math.fsum(weights[start:stop])
        if w > _NEGLIGIBLE_WEIGHT * mass:
            pairs.append((lam, w))
    return _measure(pairs)


def global_measure(model: SpectralModel, phi: Section) -> AtomicSpectralMeasure:
    """ν_Φ = Σ_α μ({α}) ν^α_Φ; equal eigenvalues coalesce by exact equality only."""
    _check_model_layout(model, phi)
    space = model.layout.space
    buckets = {}
    for atom, mu in zip(space.atoms, space.weights):
        if atom not in phi.fiber:
            continue
        for lam, w in fiber_measure(model, atom, phi).atoms:
            buckets.setdefault(lam, []).append(mu * w)
    return _measure((lam, math.fsum(buckets[lam])) for lam in sorted(buckets))


def moments(measure: AtomicSpectralMeasure) -> tuple:
    """(Σλw, Σ|λ|w, Σλ²w)."""
    return (math.fsum(lam * w for lam, w in measure.atoms),
            math.fsum(abs(lam) * w for lam, w in measure.atoms),
            math.fsum(lam * lam * w for lam, w in measure.atoms))


def mass_in(measure: AtomicSpectralMeasure, sigma: BorelSetSpec) -> float:
    return math.fsum(w for lam, w in measure.atoms if sigma.contains(lam))


def restrict(measure: AtomicSpectralMeasure, sigma: BorelSetSpec) -> AtomicSpectralMeasure:
    return _measure((lam, w) for lam, w in measure.atoms if sigma.contains(lam))


# ---------- operators ----------
def resolution_apply(model: SpectralModel, sigma: BorelSetSpec, phi: Section) -> Section:
    """E(σ)Φ: fiberwise projection onto the eigenvectors whose cluster value lies in σ."""
    _check_model_layout(model, phi)
    out = {}
    for atom, v in phi.fiber.items():
        data = model.fiber(atom)
        keep = np.zeros(len(data.eigenvalues), dtype=bool)
        for (start, stop), lam in zip(data.clusters, data.cluster_values()):
            keep[start:stop] = sigma.contains(lam)
        if keep.all():
            out[atom] = v
        elif keep.any():
            u = data.eigenvectors[:, keep]
            out[atom] = _freeze(u @ (u.conj().T @ v))
    return Section(phi.layout, out)


def commute_check(model: SpectralModel, sigma: BorelSetSpec, delta: IndexSet, phi: Section) -> float:
    """‖P_Δ E(σ)Φ - E(σ) P_ΔΦ‖."""
    return norm(project(delta, resolution_apply(model, sigma, phi)) - resolution_apply(model, sigma, project(delta, phi)))


def apply_T(model: SpectralModel, phi: Section) -> Section:
    """(TΦ)(α) = H_α Φ(α)."""
    _check_model_layout(model, phi)
    form = model.form
    return Section(phi.layout, {a: _freeze(form.matrix(a) @ v) for a, v in phi.fiber.items()})


def in_domain_T(model: SpectralModel, phi: Section, threshold: float = math.inf) -> bool:
    """Second moment of ν_Φ finite and not above the threshold."""
    second = moments(global_measure(model, phi))[2]
    return math.isfinite(second) and second <= threshold


def is_in_DFin(model: SpectralModel, phi: Section, delta: IndexSet, sigma: BorelSetSpec,
               tol: Optional[Tolerances] = None) -> bool:
    """Φ ∈ D_Fin witnessed by (Δ, σ): σ compact, supp Φ ⊆ Δ and E(σ)P_ΔΦ = Φ."""
    tol = resolve(tol)
    if not sigma.is_compact():
        return False
    if any(a not in model.layout.space for a in delta.members):
        return False
    if not phi.support().issubset(delta):
        return False
    residual = norm(phi - resolution_apply(model, sigma, project(delta, phi)))
    return residual <= tol.absolute * (1.0 + norm(phi))


def graph_norm_squared(model: SpectralModel, phi: Section) -> float:
    """⟦Φ⟧² = ‖Φ‖² + Σ_α μ({α}) ∫|λ| dν^α_Φ."""
    space = model.layout.space
    terms = [norm_squared(phi)]
    for atom, mu in zip(space.atoms, space.weights):
        if atom in phi.fiber:
            terms.append(mu * moments(fiber_measure(model, atom, phi))[1])
    return math.fsum(terms)


def graph_norm(model: SpectralModel, phi: Section) -> float:
    return math.sqrt(graph_norm_squared(model, phi))


@dataclass(frozen=True)
class NormEquivalenceVerdict:
    passed: bool
    worst_upper: float  # max ⟦Φ⟧²_Q / ((1+m)⟦Φ⟧²)
    worst_lower: float  # max ⟦Φ⟧² / ((1+2m)⟦Φ⟧²_Q)


def norm_equivalence_check(model: SpectralModel, m: float, samples: Sequence[Section],
                           tol: Optional[Tolerances] = None) -> NormEquivalenceVerdict:
    """⟦Φ⟧²_Q = (1+m)‖Φ‖² + Q(Φ) against the graph norm: ⟦·⟧²_Q ≤ (1+m)⟦·⟧² ≤ (1+m)(1+2m)⟦·⟧²_Q."""
    tol = resolve(tol)
    if m < 0:
        raise ValueError(f"semibound m must be >= 0, got {m}")
    if model.spectrum_min < -m - tol.absolute:
        raise NotSemibounded(m, model.spectrum_min)
    slack = 1.0 + tol.representation
    worst_upper = worst_lower = 0.0
    passed = True
    for phi in samples:
        form_norm = (1.0 + m) * norm_squared(phi) + eval_q(model.form, phi)
        graph = graph_norm_squared(model, phi)
        if form_norm > (1.0 + m) * graph * slack + tol.absolute:
            passed = False
        if graph > (1.0 + 2.0 * m) * form_norm * slack + tol.absolute:
            passed = False
        if graph > 0:
            worst_upper = max(worst_upper, form_norm / ((1.0 + m) * graph))
            worst_lower = max(worst_lower, graph / ((1.0 + 2.0 * m) * form_norm))
    return NormEquivalenceVerdict(passed, worst_upper, worst_lower)


# ---------- representation ----------
@dataclass(frozen=True)
class RepresentationReport:
    q_direct: float
    q_spectral: float
    q_global_spectral: float
    abs_error: float
    rel_error: float
    in_DFin: bool
    in_DT: bool
    graph_norm: float
    moments: tuple
    verdict: str


def dfin_witness(model: SpectralModel, phi: Section) -> tuple:
    """(Δ, σ) with Δ = supp Φ and σ the closed hull of the fiber spectra over Δ."""
    delta = phi.support()
    if delta.is_empty():
        return delta, EMPTY_SET
    fibers = [model.fiber(a) for a in model.layout.space.ordered(delta)]
    lo = min(float(f.eigenvalues[0]) for f in fibers)
    hi = max(float(f.eigenvalues[-1]) for f in fibers)
    return delta, closed_interval(lo, hi)


def verify_representation(model: SpectralModel, phi: Section, witness: Optional[tuple] = None,
                          tol: Optional[Tolerances] = None) -> RepresentationReport:
    """
    Compare Q(Φ) with Σ_α μ({α}) ∫λ dν^α_Φ and ∫λ dν_Φ.

    strong: all three agree and the D_Fin witness (Δ, σ) holds; weak: they
    agree but no witness was given; fail otherwise.
    """
    tol = resolve(tol)
    _check_model_layout(model, phi)
    space = model.layout.space
    q_direct = eval_q(model.form, phi, tol)
    q_spectral = math.fsum(mu * moments(fiber_measure(model, atom, phi))[0]
                           for atom, mu in zip(space.atoms, space.weights) if atom in phi.fiber)
    nu = global_measure(model, phi)
    first, first_abs, second = moments(nu)
    abs_error = abs(q_direct - q_spectral)
    rel_error = abs_error / (1.0 + abs(q_direct))
    agree = (rel_error <= tol.representation
             and abs(q_spectral - first) <= tol.representation * (1.0 + abs(q_spectral))
             and math.isfinite(first_abs))
    in_dfin = witness is not None and is_in_DFin(model, phi, witness[0], witness[1], tol)
    if agree and in_dfin:
        verdict = "strong"
    elif agree and witness is None:
        verdict = "weak"
    else:
        verdict = "fail"
    return RepresentationReport(q_direct, q_spectral, first, abs_error, rel_error, in_dfin,
                                in_domain_T(model, phi), graph_norm(model, phi), (first, first_abs, second), verdict)


@dataclass(frozen=True)
class DFinStep:
    step: int
    atoms: int
    radius: float
    distance: float
    graph_distance: float


def dfin_approximation(model: SpectralModel, phi: Section, steps: int = 5) -> list:
    """
    Φ_k = E([-r_k, r_k]) P_{Δ_k} Φ with Δ_k the k/steps heaviest atoms of the
    support and r_k = (k/steps)·max|λ|; distances to Φ shrink to 0 at k = steps.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    space = model.layout.space
    support = space.ordered(phi.support())
    masses = {a: norm_squared(project(IndexSet(frozenset([a])), phi)) for a in support}
    ranked = sorted(support, key=lambda a: -masses[a])
    radius = max((float(np.max(np.abs(model.fiber(a).eigenvalues))) for a in support), default=0.0)
    out = []
    for k in range(1, steps + 1):
        count = math.ceil(len(ranked) * k / steps)
        r = radius * k / steps if k < steps else radius
        approx = resolution_apply(model, closed_interval(-r, r), project(IndexSet(frozenset(ranked[:count])), phi))
        rest = phi - approx
        out.append(DFinStep(k, count, r, norm(rest), graph_norm(model, rest)))
    return out
