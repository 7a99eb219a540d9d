"""Alternating geometric model: counting measure on 0..k_max, H_k = (-1)^k, Φ(k) = 2^{-k/2}."""
from dataclasses import dataclass

from forms.quadratic_form import DirectIntegralForm, make_form
from spaces.direct_integral import Section, make_layout, make_section
from spaces.measure_space import IndexSet, counting_space
from utils.errors import BadRange


@dataclass(frozen=True, eq=False)
class GeometricModel:
    k_max: int
    form: DirectIntegralForm
    phi: Section

    def tail(self, n: int) -> IndexSet:
        """{k ≥ n} inside the truncation."""
        return IndexSet(frozenset(range(n, self.k_max + 1)))

    def tails(self, n_max: int) -> list:
        return [self.tail(n) for n in range(1, n_max + 1)]


def tail_bound(n: int) -> float:
    """Σ_{k≥n} 2^{-k} = 2^{1-n}."""
    return 2.0 ** (1 - n)


def geometric_model(k_max: int) -> GeometricModel:
    if k_max < 0:
        raise BadRange(f"k_max must be >= 0, got {k_max}")
    ks = list(range(k_max + 1))
    layout = make_layout(counting_space(ks, f"non-negative integers truncated at {k_max}"), [1] * len(ks))
    form = make_form(layout, [[[(-1.0) ** k]] for k in ks])
    phi = make_section(layout, {k: [2.0 ** (-k / 2)] for k in ks})
    return GeometricModel(k_max, form, phi)
