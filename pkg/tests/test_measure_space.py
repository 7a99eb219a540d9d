import math

import pytest

from models.random_model import random_partition
from spaces.measure_space import (IndexSet, Partition, counting_space, index_set, make_space, measure_of,
                                  singletons, validate_partition)
from utils.errors import DuplicateAtom, ForeignAtom, NonpositiveWeight


def test_make_space_keeps_atom_order_and_weights():
    space = make_space(["b", "a", 3], [0.5, 2, 1.25], "finite")
    assert space.atoms == ("b", "a", 3)
    assert space.weight("a") == 2.0
    assert space.truncation_note == "finite"
    assert space.total_measure == 3.75


def test_duplicate_atom_is_rejected():
    with pytest.raises(DuplicateAtom) as exc:
        make_space([1, 2, 1], [1, 1, 1])
    assert exc.value.atom == 1


@pytest.mark.parametrize("weight", [0.0, -1.0, math.inf, math.nan])
def test_nonpositive_or_nonfinite_weight_is_rejected(weight):
    with pytest.raises(NonpositiveWeight) as exc:
        make_space(["x", "y"], [1.0, weight])
    assert exc.value.atom == "y"


def test_label_and_weight_counts_must_match():
    with pytest.raises(ValueError):
        make_space([0, 1], [1.0])


def test_counting_space_has_unit_weights():
    space = counting_space(range(-2, 3), "integers truncated to [-2, 2]")
    assert space.weights == (1.0,) * 5
    assert measure_of(space, index_set([-2, 0, 2])) == 3.0


def test_measure_of_empty_set_is_zero():
    space = make_space([0, 1], [0.3, 0.7])
    assert measure_of(space, IndexSet()) == 0.0


def test_foreign_atom_is_reported():
    space = counting_space([0, 1, 2])
    with pytest.raises(ForeignAtom) as exc:
        measure_of(space, index_set([1, 7]))
    assert exc.value.atom == 7
    with pytest.raises(ForeignAtom):
        space.index("nope")


def test_measure_is_finitely_additive(rng):
    for _ in range(50):
        n = int(rng.integers(1, 13))
        space = make_space(list(range(n)), rng.uniform(0.1, 10.0, size=n))
        partition = random_partition(rng, space)
        assert validate_partition(partition)[0]
        whole = measure_of(space, partition.parent)
        parts = math.fsum(measure_of(space, p) for p in partition.parts)
        assert abs(whole - parts) <= 1e-14 * whole


def test_validate_partition_diagnostics():
    parent = index_set([0, 1, 2])
    ok, _ = validate_partition(Partition(parent, (index_set([0]), index_set([1, 2]), IndexSet())))
    assert ok

    ok, why = validate_partition(Partition(parent, (index_set([0, 1]), index_set([1, 2]))))
    assert not ok and "overlap" in why

    ok, why = validate_partition(Partition(parent, (index_set([0]), index_set([1]))))
    assert not ok and "uncovered" in why

    ok, why = validate_partition(Partition(parent, (index_set([0, 1, 2, 5]),)))
    assert not ok and "outside" in why


def test_singletons_follow_atom_order():
    space = make_space(["c", "a", "b"], [1, 2, 3])
    part = singletons(space, index_set(["b", "c"]))
    assert [sorted(p.members) for p in part.parts] == [["c"], ["b"]]
    assert validate_partition(part)[0]


def test_index_set_algebra():
    a, b = index_set([1, 2]), index_set([2, 3])
    assert a.union(b) == index_set([1, 2, 3])
    assert a.intersection(b) == index_set([2])
    assert not a.isdisjoint(b)
    assert index_set([2]).issubset(a)
    assert IndexSet().is_empty() and len(a) == 2 and 1 in a
