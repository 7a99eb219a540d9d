"""
Finite groups, their regular representations and invariant quadratic forms.

A group is a validated Cayley table over 0..n-1 with 0 the identity. The
isotypic (central) decomposition of ℂ[G] is obtained from the eigenspaces of
a random Hermitian element of the centre of the group algebra and
certified before use; invariant forms are ⟨Φ, TΨ⟩ with T in the span of the
right translations, re-expressed as a direct-integral form over the
isotypic components.
"""
import math
import re
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Hashable, Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from forms.quadratic_form import DirectIntegralForm, make_form
from parameter import Tolerances, resolve
from spaces.direct_integral import Section, make_layout, make_section
from spaces.measure_space import counting_space
from utils.errors import (ConfigError, DecompositionUnstable, NoIdentity, NoInverse, NotAssociative, NotClosed,
                          NotHermitianCoefficients, NotHomomorphism, NotInvariant, OverlappingSets)
from utils.log import get_logger

log = get_logger("group")

EXHAUSTIVE_ORDER = 64
EXHAUSTIVE_HOMOMORPHISM_ORDER = 24
MAX_RESEEDS = 10


# ---------- groups ----------
@dataclass(frozen=True, eq=False)
class GroupModel:
    order: int
    table: np.ndarray
    inverse: tuple
    name: str = ""

    def multiply(self, a: int, b: int) -> int:
        return int(self.table[a, b])


def build_group(cayley_table, name: str = "") -> GroupModel:
    """Validate closure, identity (element 0), inverses and associativity."""
    table = np.asarray(cayley_table)
    if table.ndim != 2 or table.shape[0] != table.shape[1] or table.shape[0] == 0:
        raise ValueError(f"Cayley table must be a nonempty square grid, got shape {table.shape}")
    if not np.issubdtype(table.dtype, np.integer):
        raise ValueError("Cayley table entries must be integers")
    n = table.shape[0]
    bad = np.argwhere((table < 0) | (table >= n))
    if len(bad):
        row, col = (int(x) for x in bad[0])
        raise NotClosed(row, col, int(table[row, col]))
    elements = np.arange(n)
    if not (np.array_equal(table[0], elements) and np.array_equal(table[:, 0], elements)):
        raise NoIdentity("element 0 is not a two-sided identity")

    inverse = []
    for g in range(n):
        right = np.flatnonzero(table[g] == 0)
        if len(right) != 1 or table[right[0], g] != 0:
            raise NoInverse(g)
        inverse.append(int(right[0]))

    if n <= EXHAUSTIVE_ORDER:
        # (ab)c is table[table][a, b, c]; a(bc) is table[:, table][a, b, c]
        bad = np.argwhere(table[table] != table[:, table])
    else:
        log.warning("order %d > %d: associativity checked on sampled triples", n, EXHAUSTIVE_ORDER)
        a, b, c = np.random.default_rng(0).integers(0, n, size=(3, 20000))
        mismatch = table[table[a, b], c] != table[a, table[b, c]]
        bad = np.stack([a, b, c], axis=1)[mismatch]
    if len(bad):
        raise NotAssociative(*(int(x) for x in bad[0]))

    table = table.astype(int)
    table.setflags(write=False)
    return GroupModel(n, table, tuple(inverse), name)


def closure_table(identity, generators: Sequence, compose: Callable, key: Callable[[object], Hashable]) -> np.ndarray:
    """Cayley table of the group generated by `generators`, identity first, elements in discovery order."""
    elements = [identity]
    index = {key(identity): 0}
    i = 0
    while i < len(elements):
        for s in generators:
            y = compose(elements[i], s)
            k = key(y)
            if k not in index:
                index[k] = len(elements)
                elements.append(y)
        i += 1
    n = len(elements)
    table = np.zeros((n, n), dtype=int)
    for a, x in enumerate(elements):
        for b, y in enumerate(elements):
            table[a, b] = index[key(compose(x, y))]
    return table


def _compose_perm(p: tuple, q: tuple) -> tuple:
    """(p∘q)(i) = p(q(i))."""
    return tuple(p[i] for i in q)


def cyclic_table(n: int) -> np.ndarray:
    idx = np.arange(n)
    return (idx[:, None] + idx[None, :]) % n


def symmetric_table(k: int) -> np.ndarray:
    perms = list(permutations(range(k)))
    index = {p: i for i, p in enumerate(perms)}
    return np.array([[index[_compose_perm(p, q)] for q in perms] for p in perms], dtype=int)


def dihedral_table(n: int) -> np.ndarray:
    """Symmetries of the regular n-gon acting on its vertices (order 2n)."""
    rotation = tuple((i + 1) % n for i in range(n))
    reflection = tuple((-i) % n for i in range(n))
    return closure_table(tuple(range(n)), [rotation, reflection], _compose_perm, lambda p: p)


def quaternion_table() -> np.ndarray:
    """Q8 as the closure of i = diag(i, -i) and j = [[0, 1], [-1, 0]]."""
    qi = np.array([[1j, 0], [0, -1j]])
    qj = np.array([[0, 1], [-1, 0]], dtype=complex)

    def key(m):
        return tuple((int(round(z.real)), int(round(z.imag))) for z in m.flat)

    return closure_table(np.eye(2, dtype=complex), [qi, qj], lambda a, b: a @ b, key)


SHIPPED_GROUPS = ("z2", "z3", "z4", "z6", "s3", "d4", "q8")


def shipped_group(name: str) -> GroupModel:
    """z<n> cyclic, s<k> symmetric, d<n> dihedral, q8 quaternion."""
    key = name.strip().lower()
    if key == "q8":
        return build_group(quaternion_table(), key)
    match = re.fullmatch(r"([zsd])(\d+)", key)
    if not match or int(match.group(2)) < 1:
        raise ValueError(f"unknown group {name!r}")
    kind, size = match.group(1), int(match.group(2))
    builder = {"z": cyclic_table, "s": symmetric_table, "d": dihedral_table}[kind]
    return build_group(builder(size), key)


def format_cayley(table) -> str:
    return "\n".join(" ".join(str(int(x)) for x in row) for row in np.asarray(table)) + "\n"


def parse_cayley(text: str) -> np.ndarray:
    """Whitespace-separated integer grid; blank lines and '#' comments are ignored."""
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            rows.append([int(tok) for tok in line.split()])
        except ValueError:
            raise ConfigError(f"Cayley table line {lineno} is not a row of integers") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ConfigError("Cayley table must be a square integer grid")
    return np.array(rows, dtype=int)


# ---------- regular representations ----------
@dataclass(frozen=True, eq=False)
class RegularRepresentation:
    group: GroupModel
    matrices: tuple
    side: str = "left"


def _left_matrices(group: GroupModel) -> list:
    n = group.order
    cols = np.arange(n)
    mats = []
    for g in range(n):
        m = np.zeros((n, n))
        m[group.table[g], cols] = 1.0
        mats.append(m)
    return mats


def _right_matrices(group: GroupModel) -> list:
    n = group.order
    rows = np.arange(n)
    mats = []
    for g in range(n):
        m = np.zeros((n, n))
        m[rows, group.table[:, g]] = 1.0
        mats.append(m)
    return mats


def _check_homomorphism(group: GroupModel, mats: list) -> None:
    n = group.order
    if n <= EXHAUSTIVE_HOMOMORPHISM_ORDER:
        pairs = [(a, b) for a in range(n) for b in range(n)]
    else:
        rng = np.random.default_rng(0)
        pairs = [tuple(int(x) for x in p) for p in rng.integers(0, n, size=(200, 2))]
    for a, b in pairs:
        if not np.array_equal(mats[group.multiply(a, b)], mats[a] @ mats[b]):
            raise NotHomomorphism(a, b)


def regular_rep(group: GroupModel) -> RegularRepresentation:
    """Left regular representation, (L(g)Φ)(h) = Φ(g⁻¹h)."""
    mats = _left_matrices(group)
    _check_homomorphism(group, mats)
    return RegularRepresentation(group, tuple(mats), "left")


def right_regular_rep(group: GroupModel) -> RegularRepresentation:
    """Right regular representation, (R(g)Φ)(h) = Φ(hg); it spans the commutant of L."""
    mats = _right_matrices(group)
    _check_homomorphism(group, mats)
    return RegularRepresentation(group, tuple(mats), "right")


def conjugacy_classes(group: GroupModel) -> list:
    classes = []
    seen = set()
    for i in range(group.order):
        if i in seen:
            continue
        orbit = sorted({group.multiply(group.multiply(j, i), group.inverse[j]) for j in range(group.order)})
        seen.update(orbit)
        classes.append(orbit)
    return classes


def class_sums(group: GroupModel) -> list:
    """Σ_{g∈C} R(g) for every conjugacy class C; a basis of the centre of the group algebra."""
    right = _right_matrices(group)
    return [sum(right[g] for g in cls) for cls in conjugacy_classes(group)]


# ---------- isotypic decomposition ----------
@dataclass(frozen=True, eq=False)
class IsotypicDecomposition:
    labels: tuple
    projections: tuple
    dims: tuple
    multiplicity: tuple
    bases: tuple
    residuals: dict = field(default_factory=dict)
    attempts: int = 1

    def projection(self, labels) -> np.ndarray:
        """Σ P_α over the given isotypic labels."""
        n = self.projections[0].shape[0]
        out = np.zeros((n, n), dtype=complex)
        for label in labels:
            out = out + self.projections[self.labels.index(label)]
        return out


def _hermitian_central_element(sums: list, rng: np.random.Generator) -> np.ndarray:
    coeffs = rng.normal(size=len(sums)) + 1j * rng.normal(size=len(sums))
    z = sum(c * s for c, s in zip(coeffs, sums))
    return (z + z.conj().T) / 2


def _certify(group: GroupModel, projections: list, bases: list, left: list, right: list,
             n_classes: int, tol: Tolerances) -> Optional[dict]:
    """Residuals of every certificate, or None when one of them fails."""
    n = group.order
    eye = np.eye(n)
    res = {
        "idempotent": max(float(np.max(np.abs(p @ p - p))) for p in projections),
        "completeness": float(np.max(np.abs(sum(projections) - eye))),
        "orthogonality": max((float(np.max(np.abs(p @ q))) for i, p in enumerate(projections)
                              for q in projections[i + 1:]), default=0.0),
        "central_left": max(float(np.max(np.abs(p @ m - m @ p))) for p in projections for m in left),
        "central_right": max(float(np.max(np.abs(p @ m - m @ p))) for p in projections for m in right),
    }
    if any(v > tol.group for v in res.values()):
        log.debug("isotypic certificate failed: %s", res)
        return None
    ranks = [b.shape[1] for b in bases]
    if len(projections) != n_classes or any(math.isqrt(r) ** 2 != r for r in ranks):
        log.debug("isotypic ranks %s do not match %d classes", ranks, n_classes)
        return None
    if n <= EXHAUSTIVE_HOMOMORPHISM_ORDER:
        restricted = [[b.conj().T @ m @ b for m in left] for b in bases]
        for i in range(len(bases)):
            for j in range(i + 1, len(bases)):
                if intertwiner_space(restricted[i], restricted[j], tol).dimension:
                    log.debug("components %d and %d are not disjoint", i, j)
                    return None
    return res


def isotypic_decomposition(rep: RegularRepresentation, seed: int = 0,
                           tol: Optional[Tolerances] = None) -> IsotypicDecomposition:
    """Central idempotents of ℂ[G] from a random Hermitian central element, certified before return."""
    tol = resolve(tol)
    group = rep.group
    sums = class_sums(group)
    left = list(rep.matrices) if rep.side == "left" else _left_matrices(group)
    right = _right_matrices(group)
    rng = np.random.default_rng(seed)

    for attempt in range(1, MAX_RESEEDS + 1):
        z = _hermitian_central_element(sums, rng)
        eigenvalues, vectors = scipy.linalg.eigh(z)
        scale = max(1.0, float(np.max(np.abs(eigenvalues))))
        cuts = [0] + [i for i in range(1, len(eigenvalues))
                      if eigenvalues[i] - eigenvalues[i - 1] > tol.basis_rank * scale] + [len(eigenvalues)]
        projections = [vectors[:, a:b] @ vectors[:, a:b].conj().T for a, b in zip(cuts, cuts[1:])]
        # deterministic order, independent of the random central element
        projections.sort(key=lambda p: (round(float(np.trace(p).real)),
                                        tuple(np.round(p[0].real, 8)), tuple(np.round(p[0].imag, 8))))
        bases = [scipy.linalg.orth(p, rcond=tol.basis_rank) for p in projections]
        residuals = _certify(group, projections, bases, left, right, len(sums), tol)
        if residuals is not None:
            dims = tuple(b.shape[1] for b in bases)
            for p in projections:
                p.setflags(write=False)
            log.info("group %s: %d isotypic components, ranks %s", group.name or group.order, len(dims), list(dims))
            return IsotypicDecomposition(tuple(f"iso{i}" for i in range(len(dims))), tuple(projections), dims,
                                         tuple(math.isqrt(d) for d in dims), tuple(bases), residuals, attempt)
        log.warning("isotypic decomposition attempt %d failed its certificates, reseeding", attempt)
    raise DecompositionUnstable(f"no certified decomposition after {MAX_RESEEDS} random central elements")


# ---------- intertwiners ----------
@dataclass(frozen=True, eq=False)
class IntertwinerSpace:
    basis: tuple
    dimension: int
    residual: float = 0.0


def intertwiner_space(rep1_matrices: Sequence[np.ndarray], rep2_matrices: Sequence[np.ndarray],
                      tol: Optional[Tolerances] = None) -> IntertwinerSpace:
    """Null space of M ↦ (M V₁(g) - V₂(g) M)_g over all group elements."""
    tol = resolve(tol)
    if len(rep1_matrices) != len(rep2_matrices):
        raise ValueError("representations are indexed by different element sets")
    d1 = rep1_matrices[0].shape[0]
    d2 = rep2_matrices[0].shape[0]
    # column-major vec: vec(M V1) = (V1ᵀ ⊗ I) vec(M), vec(V2 M) = (I ⊗ V2) vec(M)
    system = np.vstack([np.kron(v1.T, np.eye(d2)) - np.kron(np.eye(d1), v2)
                        for v1, v2 in zip(rep1_matrices, rep2_matrices)])
    null = scipy.linalg.null_space(system, rcond=tol.basis_rank)
    basis = tuple(null[:, k].reshape((d2, d1), order="F") for k in range(null.shape[1]))
    residual = max((float(np.max(np.abs(m @ v1 - v2 @ m))) for m in basis
                    for v1, v2 in zip(rep1_matrices, rep2_matrices)), default=0.0)
    return IntertwinerSpace(basis, len(basis), residual)


def restrict_rep(rep: RegularRepresentation, decomposition: IsotypicDecomposition, label) -> list:
    """V restricted to one isotypic component, in its orthonormal basis."""
    b = decomposition.bases[decomposition.labels.index(label)]
    return [b.conj().T @ m @ b for m in rep.matrices]


# ---------- invariant forms ----------
def _coefficient_vector(group: GroupModel, coefficients) -> np.ndarray:
    if isinstance(coefficients, Mapping):
        c = np.zeros(group.order, dtype=complex)
        for g, value in coefficients.items():
            c[int(g)] = value
        return c
    c = np.asarray(coefficients, dtype=complex).reshape(-1)
    if c.shape[0] != group.order:
        raise ValueError(f"{c.shape[0]} coefficients for a group of order {group.order}")
    return c


def invariant_operator(group: GroupModel, coefficients, side: str = "right") -> np.ndarray:
    """T = Σ c_g R(g) (side "right") or Σ c_g L(g) (side "left", not invariant in general)."""
    c = _coefficient_vector(group, coefficients)
    if side not in ("left", "right"):
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    mats = _right_matrices(group) if side == "right" else _left_matrices(group)
    return sum(cg * m for cg, m in zip(c, mats))


def random_invariant_coefficients(group: GroupModel, rng: np.random.Generator, straddle: bool = True) -> np.ndarray:
    """Coefficients with c(g⁻¹) = conj(c(g)); shifted at the identity so the spectrum of T straddles 0."""
    raw = rng.normal(size=group.order) + 1j * rng.normal(size=group.order)
    c = (raw + np.conj(raw[list(group.inverse)])) / 2
    c[0] = c[0].real
    if straddle:
        ev = scipy.linalg.eigvalsh(invariant_operator(group, c))
        c[0] -= (ev[0] + ev[-1]) / 2
    return c


@dataclass(frozen=True, eq=False)
class InvariantForm:
    group: GroupModel
    coefficients: np.ndarray
    operator: np.ndarray
    decomposition: IsotypicDecomposition
    form: DirectIntegralForm
    invariance_residual: float
    leakage: float

    def to_section(self, vector) -> Section:
        """ℂ[G] vector -> section over the isotypic atoms."""
        v = np.asarray(vector, dtype=complex)
        fibers = {label: b.conj().T @ v for label, b in zip(self.decomposition.labels, self.decomposition.bases)}
        return make_section(self.form.layout, fibers)

    def from_section(self, phi: Section) -> np.ndarray:
        out = np.zeros(self.group.order, dtype=complex)
        for label, b in zip(self.decomposition.labels, self.decomposition.bases):
            out = out + b @ phi.vector(label)
        return out


def make_invariant_form(group: GroupModel, coefficients, decomposition: Optional[IsotypicDecomposition] = None,
                        seed: int = 0, side: str = "right", tol: Optional[Tolerances] = None) -> InvariantForm:
    tol = resolve(tol)
    c = _coefficient_vector(group, coefficients)
    scale = 1.0 + float(np.max(np.abs(c)))
    for g in range(group.order):
        residual = abs(c[group.inverse[g]] - np.conj(c[g]))
        if residual > tol.hermitian * scale:
            raise NotHermitianCoefficients(g, float(residual))

    t = invariant_operator(group, c, side)
    left = _left_matrices(group)
    residual = max(float(np.max(np.abs(t @ m - m @ t))) for m in left)
    if residual > tol.group * (1.0 + float(np.max(np.abs(t)))):
        raise NotInvariant(residual)

    if decomposition is None:
        decomposition = isotypic_decomposition(RegularRepresentation(group, tuple(left), "left"), seed, tol)
    blocks = []
    for b in decomposition.bases:
        h = b.conj().T @ t @ b
        blocks.append((h + h.conj().T) / 2)
    leakage = max((float(np.max(np.abs(bi.conj().T @ t @ bj)))
                   for i, bi in enumerate(decomposition.bases)
                   for j, bj in enumerate(decomposition.bases) if i != j), default=0.0)

    space = counting_space(decomposition.labels)
    layout = make_layout(space, decomposition.dims)
    form = make_form(layout, blocks, tol=tol)
    log.debug("invariant form on %s: invariance residual %.2e, leakage %.2e", group.name, residual, leakage)
    return InvariantForm(group, c, t, decomposition, form, residual, leakage)


# ---------- checks ----------
def _quad(t: np.ndarray, v: np.ndarray) -> float:
    return float(np.vdot(v, t @ v).real)


def _polarized(t: np.ndarray, x: np.ndarray, y: np.ndarray) -> complex:
    re = _quad(t, x + y) - _quad(t, x - y)
    im = _quad(t, x + 1j * y) - _quad(t, x - 1j * y)
    return complex(re, -im) / 4.0


@dataclass(frozen=True)
class InvarianceReport:
    residual: float
    sesquilinear_residual: float
    passed: bool


def invariance_check(form_on_regular_space: Union[np.ndarray, InvariantForm], rep: RegularRepresentation,
                     samples: Sequence[np.ndarray], tol: Optional[Tolerances] = None) -> InvarianceReport:
    """
    max |Q(L(g)Φ) - Q(Φ)| over elements and samples, and the same for the
    polarized Q(L(g)Φ, L(g)Ψ) - Q(Φ, Ψ) on consecutive sample pairs.
    """
    tol = resolve(tol)
    t = form_on_regular_space.operator if isinstance(form_on_regular_space, InvariantForm) else form_on_regular_space
    worst = sesq = 0.0
    passed = True
    for i, v in enumerate(samples):
        v = np.asarray(v, dtype=complex)
        q = _quad(t, v)
        w = np.asarray(samples[(i + 1) % len(samples)], dtype=complex)
        s = _polarized(t, v, w)
        for m in rep.matrices:
            dq = abs(_quad(t, m @ v) - q)
            ds = abs(_polarized(t, m @ v, m @ w) - s)
            worst, sesq = max(worst, dq), max(sesq, ds)
            if dq > tol.relative * (1.0 + abs(q)) or ds > tol.relative * (1.0 + abs(s)):
                passed = False
    return InvarianceReport(worst, sesq, passed)


def cross_isotypic_vanish(form: Union[np.ndarray, InvariantForm], decomposition: IsotypicDecomposition,
                          delta1, delta2, samples: Sequence[tuple]) -> float:
    """max over sampled (Φ, Ψ) of |Q(P_{Δ₁}Φ, P_{Δ₂}Ψ)| for disjoint sets of isotypic labels."""
    delta1, delta2 = set(delta1), set(delta2)
    if delta1 & delta2:
        raise OverlappingSets(f"isotypic label sets share {sorted(delta1 & delta2)}")
    if not delta1 or not delta2:
        return 0.0
    t = form.operator if isinstance(form, InvariantForm) else form
    p1 = decomposition.projection(sorted(delta1))
    p2 = decomposition.projection(sorted(delta2))
    return max((abs(np.vdot(p1 @ np.asarray(v), t @ (p2 @ np.asarray(w)))) for v, w in samples), default=0.0)
