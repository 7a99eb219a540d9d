"""
Point-supported measure spaces (A, Σ(A), μ): atoms, index sets and partitions.

Only atomic measures are representable. An infinite family of atoms (ℤ, the
dual of an infinite group) is stored as a finite truncation together with a
free-text note saying so.
"""
import math
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Optional, Sequence

from utils.errors import DuplicateAtom, ForeignAtom, NonpositiveWeight


@dataclass(frozen=True)
class IndexSet:
    """A subset Δ of the atoms of one measure space."""
    members: frozenset = frozenset()

    def __post_init__(self):
        if not isinstance(self.members, frozenset):
            object.__setattr__(self, "members", frozenset(self.members))

    def __contains__(self, atom) -> bool:
        return atom in self.members

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def is_empty(self) -> bool:
        return not self.members

    def union(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(self.members | other.members)

    def intersection(self, other: "IndexSet") -> "IndexSet":
        return IndexSet(self.members & other.members)

    def isdisjoint(self, other: "IndexSet") -> bool:
        return self.members.isdisjoint(other.members)

    def issubset(self, other: "IndexSet") -> bool:
        return self.members <= other.members


def index_set(members: Iterable = ()) -> IndexSet:
    return IndexSet(frozenset(members))


@dataclass(frozen=True)
class AtomicMeasureSpace:
    atoms: tuple
    weights: tuple
    truncation_note: Optional[str] = None
    _position: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_position", {a: i for i, a in enumerate(self.atoms)})

    def __len__(self) -> int:
        return len(self.atoms)

    def __contains__(self, atom) -> bool:
        return atom in self._position

    def index(self, atom) -> int:
        try:
            return self._position[atom]
        except (KeyError, TypeError):
            raise ForeignAtom(atom) from None

    def weight(self, atom) -> float:
        return self.weights[self.index(atom)]

    def all_atoms(self) -> IndexSet:
        return IndexSet(frozenset(self.atoms))

    def check(self, delta: IndexSet) -> IndexSet:
        """Raise ForeignAtom for the first member (in a stable order) not in the space."""
        for atom in sorted(delta.members, key=repr):
            if atom not in self._position:
                raise ForeignAtom(atom)
        return delta

    def ordered(self, delta: IndexSet) -> list:
        """Members of Δ in the space's fixed atom order."""
        self.check(delta)
        return [a for a in self.atoms if a in delta.members]

    @property
    def total_measure(self) -> float:
        return math.fsum(self.weights)


def make_space(atom_labels: Sequence[Hashable], weights: Sequence[float],
               truncation_note: Optional[str] = None) -> AtomicMeasureSpace:
    """Validated space; μ(Δ) is the sum of the atom weights in Δ."""
    labels = list(atom_labels)
    weights = [float(w) for w in weights]
    if len(labels) != len(weights):
        raise ValueError(f"{len(labels)} atom labels but {len(weights)} weights")
    seen = set()
    for atom, w in zip(labels, weights):
        if atom in seen:
            raise DuplicateAtom(atom)
        seen.add(atom)
        if not (w > 0 and math.isfinite(w)):
            raise NonpositiveWeight(atom, w)
    return AtomicMeasureSpace(tuple(labels), tuple(weights), truncation_note)


def counting_space(atom_labels: Sequence[Hashable], truncation_note: Optional[str] = None) -> AtomicMeasureSpace:
    labels = list(atom_labels)
    return make_space(labels, [1.0] * len(labels), truncation_note)


def measure_of(space: AtomicMeasureSpace, delta: IndexSet) -> float:
    """μ(Δ) = Σ_{α∈Δ} μ({α}); 0 for the empty set."""
    return math.fsum(space.weight(a) for a in space.ordered(delta))


@dataclass(frozen=True)
class Partition:
    parent: IndexSet
    parts: tuple

    def __post_init__(self):
        if not isinstance(self.parts, tuple):
            object.__setattr__(self, "parts", tuple(self.parts))


def validate_partition(p: Partition) -> tuple:
    """(verdict, diagnostics): parts must be pairwise disjoint and cover the parent exactly."""
    seen = {}
    for i, part in enumerate(p.parts):
        for atom in sorted(part.members, key=repr):
            if atom in seen:
                return False, f"overlap at atom {atom!r} (parts {seen[atom]} and {i})"
            if atom not in p.parent.members:
                return False, f"atom {atom!r} of part {i} is outside the parent set"
            seen[atom] = i
    for atom in sorted(p.parent.members, key=repr):
        if atom not in seen:
            return False, f"uncovered atom {atom!r}"
    return True, "ok"


def singletons(space: AtomicMeasureSpace, delta: Optional[IndexSet] = None) -> Partition:
    """Partition of Δ (default: all atoms) into singletons, in atom order."""
    delta = space.all_atoms() if delta is None else delta
    return Partition(delta, tuple(IndexSet(frozenset([a])) for a in space.ordered(delta)))
