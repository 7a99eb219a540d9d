"""Exception hierarchy shared by every module."""


class FormRepError(Exception):
    """Base class for all errors raised by the library."""


class ConfigError(FormRepError):
    """Malformed or inconsistent model configuration."""


# ---------- measure spaces / direct integrals ----------
class DuplicateAtom(FormRepError):
    def __init__(self, atom):
        super().__init__(f"duplicate atom label {atom!r}")
        self.atom = atom


class NonpositiveWeight(FormRepError):
    def __init__(self, atom, weight):
        super().__init__(f"weight of atom {atom!r} must be positive and finite, got {weight!r}")
        self.atom = atom
        self.weight = weight


class ForeignAtom(FormRepError):
    def __init__(self, atom):
        super().__init__(f"atom {atom!r} does not belong to the measure space")
        self.atom = atom


class LayoutMismatch(FormRepError):
    """Two sections (or a form and a section) live on different layouts."""


class DimensionMismatch(FormRepError):
    def __init__(self, atom, expected, got):
        super().__init__(f"fiber at atom {atom!r} has dimension {expected}, got {got}")
        self.atom = atom
        self.expected = expected
        self.got = got


class InvalidPartition(FormRepError):
    """Partition parts overlap or do not cover their parent."""


class OverlappingSets(FormRepError):
    """Index sets required to be disjoint share an atom."""


class OverlappingIntervals(FormRepError):
    """Intervals of a Borel set specification are not pairwise disjoint."""


# ---------- forms ----------
class NonHermitianForm(FormRepError):
    def __init__(self, atom, residual):
        super().__init__(f"fiber matrix at atom {atom!r} is not Hermitian (residual {residual:.3e})")
        self.atom = atom
        self.residual = residual


class NonNestedTails(FormRepError):
    def __init__(self, index):
        super().__init__(f"tail {index} is not contained in tail {index - 1}")
        self.index = index


class PreconditionViolated(FormRepError):
    def __init__(self, index, q_value, bound):
        super().__init__(f"sample section {index}: |Q| = {abs(q_value):.6g} exceeds M*h = {bound:.6g}")
        self.index = index
        self.q_value = q_value
        self.bound = bound


# ---------- spectral ----------
class EigenFailure(FormRepError):
    def __init__(self, atom, reason=""):
        super().__init__(f"eigensolver failed at atom {atom!r} {reason}".rstrip())
        self.atom = atom


class SemiboundViolation(FormRepError):
    def __init__(self, atom, declared, actual):
        super().__init__(f"declared lower bound {declared:.6g} at atom {atom!r} exceeds the spectrum minimum {actual:.6g}")
        self.atom = atom
        self.declared = declared
        self.actual = actual


class NotSemibounded(FormRepError):
    def __init__(self, m, spectrum_min):
        super().__init__(f"spectrum minimum {spectrum_min:.6g} is below -m = {-m:.6g}")
        self.m = m
        self.spectrum_min = spectrum_min


# ---------- models ----------
class BadRange(FormRepError):
    """Invalid truncation range or grid size."""


# ---------- groups ----------
class NotClosed(FormRepError):
    def __init__(self, row, col, value):
        super().__init__(f"table entry ({row}, {col}) = {value} is not a group element")
        self.row, self.col, self.value = row, col, value


class NoIdentity(FormRepError):
    """Element 0 does not act as the identity."""


class NoInverse(FormRepError):
    def __init__(self, element):
        super().__init__(f"element {element} has no two-sided inverse")
        self.element = element


class NotAssociative(FormRepError):
    def __init__(self, a, b, c):
        super().__init__(f"(g{a} g{b}) g{c} != g{a} (g{b} g{c})")
        self.triple = (a, b, c)


class NotHomomorphism(FormRepError):
    def __init__(self, a, b):
        super().__init__(f"L(g{a} g{b}) != L(g{a}) L(g{b})")
        self.pair = (a, b)


class DecompositionUnstable(FormRepError):
    """Isotypic decomposition kept failing its certificates after every reseed."""


class NotHermitianCoefficients(FormRepError):
    def __init__(self, element, residual):
        super().__init__(f"c(g^-1) != conj(c(g)) at element {element} (residual {residual:.3e})")
        self.element = element
        self.residual = residual


class NotInvariant(FormRepError):
    def __init__(self, residual):
        super().__init__(f"operator does not commute with the left regular representation (residual {residual:.3e})")
        self.residual = residual
