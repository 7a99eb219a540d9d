"""
Hermitean quadratic forms on a direct integral.

A DirectIntegralForm carries one Hermitian matrix H_α per atom and evaluates

    Q(Φ, Ψ) = Σ_α μ({α}) ⟨Φ(α), H_α Ψ(α)⟩_α .

Every checker below also accepts a black-box quadratic provider: any
callable Section -> float. Sesquilinear values of black-box providers are
obtained by polarization.
"""
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from parameter import Tolerances, resolve
from spaces.direct_integral import FiberLayout, Section, _same_layout, norm, norm_squared, project
from spaces.measure_space import IndexSet, Partition, validate_partition
from utils.errors import (DimensionMismatch, InvalidPartition, LayoutMismatch, NonHermitianForm,
                          NonNestedTails, OverlappingSets, PreconditionViolated)
from utils.log import get_logger

log = get_logger("forms")

QuadraticProvider = Callable[[Section], float]


@dataclass(frozen=True)
class FiberSemibound:
    """Spectral bounds of the weighted fiber form μ({α})·q_α."""
    lower: float
    upper: float

    @property
    def m(self) -> float:
        """The non-negative constant m_α with μ q_α ≥ -m_α ‖·‖²_α."""
        return -min(0.0, self.lower)

    @property
    def direction(self) -> str:
        return "below" if self.lower >= 0 else "above" if self.upper <= 0 else "both"


@dataclass(frozen=True, eq=False)
class DirectIntegralForm:
    layout: FiberLayout
    matrices: tuple
    semibound_info: tuple

    def matrix(self, atom) -> np.ndarray:
        return self.matrices[self.layout.space.index(atom)]

    def semibound(self, atom) -> FiberSemibound:
        return self.semibound_info[self.layout.space.index(atom)]

    def __call__(self, phi: Section) -> float:
        return eval_q(self, phi)


def hermitian_residual(h: np.ndarray) -> float:
    return float(np.max(np.abs(h - h.conj().T))) if h.size else 0.0


def make_form(layout: FiberLayout, matrices, semibound_info=None,
              tol: Optional[Tolerances] = None, check: bool = True) -> DirectIntegralForm:
    """
    Build a form from fiber matrices given in atom order or as a map atom -> matrix.

    semibound_info, when omitted, is computed from the fiber spectra; when
    given it is stored as declared and verified by spectral.decompose.
    """
    tol = resolve(tol)
    space = layout.space
    if isinstance(matrices, Mapping):
        matrices = [matrices[a] for a in space.atoms]
    if len(matrices) != len(space):
        raise ValueError(f"{len(matrices)} fiber matrices for {len(space)} atoms")
    frozen = []
    for atom, d, h in zip(space.atoms, layout.dims, matrices):
        h = np.array(h, dtype=complex)
        if h.ndim != 2 or h.shape != (d, d):
            raise DimensionMismatch(atom, d, h.shape[0] if h.ndim else 0)
        if check:
            residual = hermitian_residual(h)
            if residual > tol.hermitian * (1.0 + float(np.max(np.abs(h)))):
                raise NonHermitianForm(atom, residual)
        h.setflags(write=False)
        frozen.append(h)

    if semibound_info is None:
        bounds = []
        for w, h in zip(space.weights, frozen):
            ev = scipy.linalg.eigvalsh(h)
            bounds.append(FiberSemibound(w * float(ev[0]), w * float(ev[-1])))
    else:
        if isinstance(semibound_info, Mapping):
            semibound_info = [semibound_info[a] for a in space.atoms]
        bounds = [b if isinstance(b, FiberSemibound) else FiberSemibound(float(b[0]), float(b[1]))
                  for b in semibound_info]
    return DirectIntegralForm(layout, tuple(frozen), tuple(bounds))


def _check_layout(form: DirectIntegralForm, phi: Section) -> None:
    if phi.layout is not form.layout and phi.layout != form.layout:
        raise LayoutMismatch("section layout differs from the form layout")


def as_quadratic(q: Union[DirectIntegralForm, QuadraticProvider]) -> QuadraticProvider:
    if isinstance(q, DirectIntegralForm):
        return lambda phi: eval_q(q, phi)
    return q


# ---------- evaluation ----------
def eval_q(form: DirectIntegralForm, phi: Section, tol: Optional[Tolerances] = None) -> float:
    """Q(Φ) = Σ_α μ({α}) ⟨Φ(α), H_α Φ(α)⟩_α; the rounding-level imaginary residue is checked, then dropped."""
    _check_layout(form, phi)
    tol = resolve(tol)
    layout = form.layout
    terms = []
    for atom, w, g, h in zip(layout.space.atoms, layout.space.weights, layout.metrics, form.matrices):
        v = phi.fiber.get(atom)
        if v is None:
            continue
        hv = h @ v
        t = w * g * np.vdot(v, hv)
        scale = w * g * float(np.linalg.norm(v) * np.linalg.norm(hv))
        if abs(t.imag) > tol.imag_residue * scale + 1e-300:
            raise NonHermitianForm(atom, abs(t.imag) / scale)
        terms.append(t.real)
    return math.fsum(terms)


def eval_sesq(form: DirectIntegralForm, phi: Section, psi: Section) -> complex:
    """Q(Φ,Ψ), conjugate-linear in Φ."""
    _check_layout(form, phi)
    _check_layout(form, psi)
    layout = form.layout
    terms = []
    for atom, w, g, h in zip(layout.space.atoms, layout.space.weights, layout.metrics, form.matrices):
        if atom in phi.fiber and atom in psi.fiber:
            terms.append(w * g * np.vdot(phi.fiber[atom], h @ psi.fiber[atom]))
    return complex(math.fsum(t.real for t in terms), math.fsum(t.imag for t in terms))


def polarize(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section, psi: Section) -> complex:
    """
    Sesquilinear value recovered from the diagonal:
    (1/4)[Q(Φ+Ψ) - Q(Φ-Ψ) - iQ(Φ+iΨ) + iQ(Φ-iΨ)], conjugate-linear in Φ.
    """
    q = as_quadratic(q)
    re = q(phi + psi) - q(phi - psi)
    im = q(phi + 1j * psi) - q(phi - 1j * psi)
    return complex(re, -im) / 4.0


def sesquilinear(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section, psi: Section) -> complex:
    if isinstance(q, DirectIntegralForm):
        return eval_sesq(q, phi, psi)
    return polarize(q, phi, psi)


# ---------- the measure Ω_Φ and its density ----------
@dataclass(frozen=True)
class SignedAtomicMeasure:
    atoms: tuple
    values: tuple
    total_variation: float

    def value(self, atom) -> float:
        return self.values[self.atoms.index(atom)]

    def of(self, delta: IndexSet) -> float:
        """Ω_Φ(Δ), summed in atom order."""
        return math.fsum(v for a, v in zip(self.atoms, self.values) if a in delta.members)

    def total(self) -> float:
        return math.fsum(self.values)


def omega_measure(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section) -> SignedAtomicMeasure:
    """Ω_Φ({α}) = Q(P_{α}Φ) for every atom."""
    q = as_quadratic(q)
    space = phi.layout.space
    values = []
    for atom in space.atoms:
        values.append(q(project(IndexSet(frozenset([atom])), phi)) if atom in phi.fiber else 0.0)
    return SignedAtomicMeasure(space.atoms, tuple(values), math.fsum(abs(v) for v in values))


def density(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section) -> dict:
    """Radon-Nikodym density ω_Φ(α) = Ω_Φ({α}) / μ({α})."""
    omega = omega_measure(q, phi)
    space = phi.layout.space
    return {a: v / w for a, v, w in zip(space.atoms, omega.values, space.weights)}


# ---------- orthogonal additivity ----------
@dataclass(frozen=True)
class AdditivityVerdict:
    passed: bool
    residual: float
    whole: float
    parts_sum: float


def check_orthogonal_additivity(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section,
                                partition: Partition, tol: Optional[Tolerances] = None) -> AdditivityVerdict:
    """|Q(P_ΔΦ) - Σ_i Q(P_{Δ_i}Φ)| against 1e-11·(1 + |Q(P_ΔΦ)|)."""
    ok, why = validate_partition(partition)
    if not ok:
        raise InvalidPartition(why)
    tol = resolve(tol)
    q = as_quadratic(q)
    whole = q(project(partition.parent, phi))
    parts_sum = math.fsum(q(project(part, phi)) for part in partition.parts)
    residual = abs(whole - parts_sum)
    return AdditivityVerdict(residual <= tol.relative * (1.0 + abs(whole)), residual, whole, parts_sum)


def additivity_defect(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section,
                      delta1: IndexSet, delta2: IndexSet) -> float:
    """Q(P_{Δ1∪Δ2}Φ) - Q(P_{Δ1}Φ) - Q(P_{Δ2}Φ) = 2 Re Q(P_{Δ1}Φ, P_{Δ2}Φ) for disjoint Δ's."""
    if not delta1.isdisjoint(delta2):
        raise OverlappingSets(f"index sets share atoms {sorted(delta1.intersection(delta2), key=repr)}")
    q = as_quadratic(q)
    return q(project(delta1.union(delta2), phi)) - q(project(delta1, phi)) - q(project(delta2, phi))


@dataclass(frozen=True)
class TailReport:
    values: tuple
    below_tolerance: bool
    first_below: Optional[int]


def check_tail_vanishing(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section,
                         nested_tails: Sequence[IndexSet], tolerance: float = 1e-12) -> TailReport:
    """Sequence |Q(P_{Δ(n)}Φ)| over decreasing tails Δ(n) ⊇ Δ(n+1)."""
    for i in range(1, len(nested_tails)):
        if not nested_tails[i].issubset(nested_tails[i - 1]):
            raise NonNestedTails(i)
    q = as_quadratic(q)
    values = tuple(abs(q(project(tail, phi))) for tail in nested_tails)
    first = next((i for i, v in enumerate(values) if v <= tolerance), None)
    return TailReport(values, bool(values) and values[-1] <= tolerance, first)


def cross_term(q: Union[DirectIntegralForm, QuadraticProvider], delta1: IndexSet, delta2: IndexSet,
               phi: Section, psi: Section) -> complex:
    """Q(P_{Δ1}Φ, P_{Δ2}Ψ) for disjoint Δ1, Δ2."""
    if not delta1.isdisjoint(delta2):
        raise OverlappingSets(f"index sets share atoms {sorted(delta1.intersection(delta2), key=repr)}")
    return sesquilinear(q, project(delta1, phi), project(delta2, psi))


# ---------- boundedness ----------
def finite_measure_bound(form: DirectIntegralForm, delta: IndexSet) -> float:
    """M_Δ = max_{α∈Δ} spectral radius of H_α, so |Q(P_ΔΦ)| ≤ M_Δ ‖P_ΔΦ‖²."""
    radii = [float(np.max(np.abs(scipy.linalg.eigvalsh(form.matrix(a)))))
             for a in form.layout.space.ordered(delta)]
    return max(radii, default=0.0)


def check_finite_measure_bound(form: DirectIntegralForm, delta: IndexSet, samples: Sequence[Section],
                               tol: Optional[Tolerances] = None) -> tuple:
    """(passed, worst ratio |Q(P_ΔΦ)| / (M_Δ ‖P_ΔΦ‖²)) over the samples."""
    tol = resolve(tol)
    bound = finite_measure_bound(form, delta)
    worst = 0.0
    passed = True
    for phi in samples:
        part = project(delta, phi)
        value, mass = abs(eval_q(form, part)), norm_squared(part)
        if value > bound * mass * (1.0 + tol.relative) + tol.absolute:
            passed = False
        if bound * mass > 0:
            worst = max(worst, value / (bound * mass))
    return passed, worst


def sigma_bound_check(q: Union[DirectIntegralForm, QuadraticProvider], phi: Section,
                      deltas: Sequence[IndexSet], tol: Optional[Tolerances] = None) -> tuple:
    """(passed, max_Δ |Q(P_ΔΦ)|, M_Φ = |Ω_Φ|(A))."""
    tol = resolve(tol)
    q = as_quadratic(q)
    bound = omega_measure(q, phi).total_variation
    largest = max((abs(q(project(d, phi))) for d in deltas), default=0.0)
    return largest <= bound + tol.representation, largest, bound


# ---------- generalized Cauchy-Schwarz ----------
@dataclass(frozen=True)
class CSBVerdict:
    passed: bool
    worst_excess: float
    failures: int


def csb_check(q: Union[DirectIntegralForm, QuadraticProvider], h: QuadraticProvider, M: float,
              samples: Sequence[tuple], tol: Optional[Tolerances] = None) -> CSBVerdict:
    """
    |Q(Φ,Ψ)| ≤ M √h(Φ) √h(Ψ) on every sampled pair, given |Q| ≤ M·h on every
    sampled section (checked first; PreconditionViolated names the section).
    """
    tol = resolve(tol)
    quad = as_quadratic(q)
    h_values = {}
    for i, pair in enumerate(samples):
        for j, section in enumerate(pair):
            key = 2 * i + j
            hv = h(section)
            if hv < -tol.csb_slack:
                raise ValueError(f"h is negative ({hv:.6g}) on sample section {key}")
            hv = max(hv, 0.0)
            qv = quad(section)
            if abs(qv) > M * hv + tol.csb_slack * (1.0 + M * hv):
                raise PreconditionViolated(key, qv, M * hv)
            h_values[key] = hv

    worst = -math.inf
    failures = 0
    for i, (phi, psi) in enumerate(samples):
        lhs = abs(sesquilinear(q, phi, psi))
        rhs = M * math.sqrt(h_values[2 * i]) * math.sqrt(h_values[2 * i + 1])
        excess = lhs - rhs
        worst = max(worst, excess)
        if excess > tol.csb_slack:
            failures += 1
    log.debug("csb: %d pairs, worst excess %.3e", len(samples), worst)
    return CSBVerdict(failures == 0, worst if samples else 0.0, failures)


# ---------- closability ----------
@dataclass(frozen=True)
class ProbeTolerances:
    norm: float = 1e-6
    cauchy: float = 1e-10
    value: float = 1e-6
    window: Optional[int] = None


@dataclass(frozen=True)
class ClosabilityWitness:
    norms: tuple
    differences: tuple
    values: tuple


@dataclass(frozen=True)
class ClosabilityVerdict:
    status: str
    witness: Optional[ClosabilityWitness]
    norm_trend: bool
    cauchy: bool
    nonvanishing: bool


def closability_probe(q: Union[DirectIntegralForm, QuadraticProvider], sequence: Sequence[Section],
                      tolerances: Optional[ProbeTolerances] = None,
                      norm_fn: Callable[[Section], float] = norm,
                      difference: Optional[Callable[[Section, Section], Section]] = None) -> ClosabilityVerdict:
    """
    Look for a sequence with Φ_n -> 0 and Q(Φ_n - Φ_m) -> 0 but Q(Φ_n) not -> 0.
    Finite evidence can only falsify closability: the result is either
    "violation" (with witness) or "consistent".
    """
    if not sequence:
        raise ValueError("closability probe needs a nonempty sequence")
    tol = tolerances or ProbeTolerances()
    q = as_quadratic(q)
    difference = difference or (lambda a, b: a - b)

    norms = tuple(norm_fn(phi) for phi in sequence)
    trend = all(b <= a * (1.0 + 1e-12) for a, b in zip(norms, norms[1:])) and norms[-1] <= tol.norm

    start = 0 if tol.window is None else max(0, len(sequence) - tol.window)
    window = range(start, len(sequence))
    diffs = tuple((n, m, q(difference(sequence[n], sequence[m]))) for n, m in combinations(window, 2))
    cauchy = max((abs(d) for _, _, d in diffs), default=0.0) <= tol.cauchy
    values = tuple(q(sequence[n]) for n in window)
    nonvanishing = min(abs(v) for v in values) > tol.value

    if trend and cauchy and nonvanishing:
        log.info("closability violated: |Q(Phi_n)| stays >= %.3g while ||Phi_n|| -> %.3g",
                 min(abs(v) for v in values), norms[-1])
        return ClosabilityVerdict("violation", ClosabilityWitness(norms, diffs, values), trend, cauchy, nonvanishing)
    return ClosabilityVerdict("consistent", None, trend, cauchy, nonvanishing)
