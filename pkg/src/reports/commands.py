"""
Pipeline commands: represent, check (property suites) and group.

Every command builds a report body, hands it to the ReportWriter and
returns an exit code: 0 success, 1 a failed property or verdict.
Configuration problems surface as ConfigError (exit 2 in app.py).
"""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.linalg

from forms.quadratic_form import (DirectIntegralForm, check_finite_measure_bound, check_orthogonal_additivity,
                                  check_tail_vanishing, closability_probe, cross_term, density, make_form,
                                  omega_measure, csb_check, sigma_bound_check)
from forms.spectral import (SpectralModel, decompose, dfin_approximation, dfin_witness, eigen_table, graph_norm_squared,
                            norm_equivalence_check, verify_representation)
from groups.group_rep import (InvariantForm, build_group, conjugacy_classes, cross_isotypic_vanish,
                              intertwiner_space, invariance_check, isotypic_decomposition, make_invariant_form,
                              parse_cayley, random_invariant_coefficients, regular_rep, restrict_rep, shipped_group)
from models.geometric import geometric_model, tail_bound
from models.position import PositionModel, indicator_section, position_model
from models.random_model import (random_hermitian, random_index_set, random_model, random_partition,
                                 random_section)
from models.spectral_partition import reverse_check, spectral_partition_model
from models.spike import spike_family
from parameter import Tolerances
from reports.model_config import ModelConfig, parse_vector
from reports.report_writer import ReportWriter
from spaces.direct_integral import Section, make_layout, make_section
from spaces.measure_space import IndexSet, make_space, singletons
from utils.errors import (BadRange, ConfigError, DimensionMismatch, DuplicateAtom, ForeignAtom, NoIdentity, NoInverse,
                          NonHermitianForm, NonpositiveWeight, NotAssociative, NotClosed)
from utils.log import get_logger

log = get_logger("cli")

SUITES = ("oa", "tails", "closability", "csb", "norms", "dfin", "reverse")
VERDICTS_OK = ("strong", "weak")

_MODEL_ERRORS = (DuplicateAtom, NonpositiveWeight, DimensionMismatch, NonHermitianForm, ForeignAtom, BadRange,
                 NotClosed, NoIdentity, NoInverse, NotAssociative, ValueError, KeyError, TypeError)


# ---------- model assembly ----------
@dataclass(frozen=True, eq=False)
class Materialized:
    kind: str
    form: DirectIntegralForm
    position: Optional[PositionModel] = None
    invariant: Optional[InvariantForm] = None


def load_group(ref: str):
    """A shipped group name (z4, s3, q8, ...) or the path of a Cayley table file."""
    path = Path(ref)
    try:
        if path.is_file():
            return build_group(parse_cayley(path.read_text()), path.stem)
        return shipped_group(ref)
    except _MODEL_ERRORS as e:
        raise ConfigError(f"group {ref}: {e}") from e


def parse_coefficients(text: str) -> list:
    """Comma-separated complex literals such as "0,1" or "1,0.5+0.5j,0.5-0.5j"."""
    try:
        return [complex(tok.strip().replace(" ", "")) for tok in text.split(",") if tok.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse coefficients {text!r}") from None


def materialize(config: ModelConfig) -> Materialized:
    p = config.params
    try:
        if config.kind == "explicit":
            space = make_space(p["atoms"], p["weights"])
            layout = make_layout(space, p["dims"], p.get("metrics"))
            return Materialized("explicit", make_form(layout, p["matrices"], tol=config.tolerances))
        if config.kind == "position":
            model = position_model(p["k_min"], p["k_max"], p["n_per_cell"])
            return Materialized("position", model.form, position=model)
        if config.kind == "random":
            model = random_model(config.seed, p["n_atoms"], p["max_dim"], p["eig_range"])
            return Materialized("random", model.form)
    except _MODEL_ERRORS as e:
        raise ConfigError(f"invalid {config.kind} model: {e}") from e

    group = load_group(p.get("cayley") or p["name"])
    coefficients = p["coefficients"]
    if isinstance(coefficients, str):
        coefficients = random_invariant_coefficients(group, np.random.default_rng(config.seed))
    elif len(coefficients) != group.order:
        raise ConfigError(f"{len(coefficients)} coefficients for a group of order {group.order}")
    invariant = make_invariant_form(group, coefficients, seed=config.seed, side=p["side"], tol=config.tolerances)
    return Materialized("group", invariant.form, invariant=invariant)


def _random_vector(rng: np.random.Generator, n: int) -> np.ndarray:
    return rng.normal(size=n) + 1j * rng.normal(size=n)


def build_sections(config: ModelConfig, mat: Materialized, rng: np.random.Generator) -> list:
    """[(label, Section)] from the config's section sources, or a default sample set."""
    layout = mat.form.layout
    specs = list(config.sections)
    if not specs:
        if mat.position is not None:
            specs = [{"indicator": [0, 1]}, {"indicator": [-1, 0]}, {"indicator": [-1, 1]}]
        else:
            specs = [{"random": 5}]

    out = []
    for i, spec in enumerate(specs):
        try:
            if "pairs" in spec:
                fibers = {atom: parse_vector(entries) for atom, entries in spec["pairs"]}
                out.append((f"pairs[{i}]", make_section(layout, fibers)))
            elif "indicator" in spec:
                if mat.position is None:
                    raise ConfigError("indicator sections need a position model")
                lo, hi = (float(x) for x in spec["indicator"])
                out.append((f"indicator[{lo:g},{hi:g})", indicator_section(mat.position, lo, hi)))
            elif "vector" in spec:
                if mat.invariant is None:
                    raise ConfigError("vector sections need a group model")
                out.append((f"vector[{i}]", mat.invariant.to_section(parse_vector(spec["vector"]))))
            elif "random" in spec:
                count = int(spec["random"])
                for j in range(count):
                    if mat.invariant is not None:
                        phi = mat.invariant.to_section(_random_vector(rng, mat.invariant.group.order))
                    else:
                        phi = random_section(rng, layout)
                    out.append((f"random[{i}.{j}]", phi))
            else:
                raise ConfigError(f"section source {i} has none of pairs, indicator, vector, random")
        except ConfigError:
            raise
        except _MODEL_ERRORS as e:
            raise ConfigError(f"section source {i}: {e}") from e
    return out


def model_summary(form: DirectIntegralForm, spectral: SpectralModel) -> dict:
    space = form.layout.space
    return {
        "atoms": list(space.atoms),
        "weights": list(space.weights),
        "dims": list(form.layout.dims),
        "truncation": space.truncation_note,
        "spectrum": {"min": spectral.spectrum_min, "max": spectral.spectrum_max,
                     "m_below": spectral.m_below, "m_above": spectral.m_above},
        "eigenvalues": eigen_table(spectral),
    }


# ---------- represent ----------
def representation_entry(label: str, form: DirectIntegralForm, spectral: SpectralModel, phi: Section,
                         tol: Tolerances) -> dict:
    report = verify_representation(spectral, phi, dfin_witness(spectral, phi), tol)
    omega = omega_measure(form, phi)
    rho = density(form, phi)
    return {
        "source": label,
        "q_direct": report.q_direct,
        "q_spectral": report.q_spectral,
        "q_global_spectral": report.q_global_spectral,
        "abs_error": report.abs_error,
        "rel_error": report.rel_error,
        "moments": {"first": report.moments[0], "first_abs": report.moments[1], "second": report.moments[2]},
        "graph_norm": report.graph_norm,
        "in_DFin": report.in_DFin,
        "in_DT": report.in_DT,
        "omega": list(omega.values),
        "omega_total_variation": omega.total_variation,
        "density": [rho[a] for a in form.layout.space.atoms],
        "verdict": report.verdict,
    }


def cmd_represent(config: ModelConfig, writer: ReportWriter, out: Optional[str] = None, workers: int = 1) -> int:
    tol = config.tolerances
    mat = materialize(config)
    spectral = decompose(mat.form, tol, workers)
    sections = build_sections(config, mat, np.random.default_rng(config.seed))
    entries = [representation_entry(label, mat.form, spectral, phi, tol) for label, phi in sections]
    counts = {v: sum(e["verdict"] == v for e in entries) for v in ("strong", "weak", "fail")}
    body = {"model": {"kind": mat.kind, **model_summary(mat.form, spectral)},
            "sections": entries,
            "summary": {"count": len(entries), **counts}}
    writer.write(writer.document("represent", config.seed, body), out)
    if counts["fail"]:
        log.warning("%d of %d sections failed the representation check", counts["fail"], len(entries))
        return 1
    log.info("represent: %d sections, %d strong, %d weak", len(entries), counts["strong"], counts["weak"])
    return 0


# ---------- check suites ----------
@dataclass
class CheckContext:
    form: DirectIntegralForm
    rng: np.random.Generator
    tol: Tolerances
    workers: int = 1
    _spectral: Optional[SpectralModel] = field(default=None, repr=False)

    @property
    def spectral(self) -> SpectralModel:
        if self._spectral is None:
            self._spectral = decompose(self.form, self.tol, self.workers)
        return self._spectral

    def section(self, density: float = 1.0) -> Section:
        return random_section(self.rng, self.form.layout, density)


def _prop(name: str, passed: bool, **values) -> dict:
    return {"property": name, "passed": bool(passed), **values}


def suite_oa(ctx: CheckContext) -> list:
    form, rng, tol = ctx.form, ctx.rng, ctx.tol
    space = form.layout.space
    worst, ok = 0.0, True
    for _ in range(100):
        phi = ctx.section(0.8)
        partition = random_partition(rng, space, random_index_set(rng, space, 0.7))
        verdict = check_orthogonal_additivity(form, phi, partition, tol)
        worst, ok = max(worst, verdict.residual), ok and verdict.passed

    cross = 0.0
    for _ in range(100):
        d1 = random_index_set(rng, space)
        rest = space.all_atoms().members - d1.members
        d2 = IndexSet(frozenset(a for a in rest if rng.random() < 0.5))
        cross = max(cross, abs(cross_term(form, d1, d2, ctx.section(), ctx.section())))

    sigma_ok, sigma_worst = True, 0.0
    for _ in range(10):
        phi = ctx.section()
        passed, largest, bound = sigma_bound_check(form, phi, [random_index_set(rng, space) for _ in range(200)], tol)
        sigma_ok = sigma_ok and passed
        sigma_worst = max(sigma_worst, largest / bound if bound else 0.0)

    recon = 0.0
    for _ in range(10):
        phi = ctx.section()
        rho = density(form, phi)
        omega = omega_measure(form, phi)
        for _ in range(20):
            delta = random_index_set(rng, space)
            integral = sum(rho[a] * space.weight(a) for a in space.ordered(delta))
            recon = max(recon, abs(integral - omega.of(delta)) / (1.0 + abs(omega.of(delta))))

    bound_ok, ratio = check_finite_measure_bound(form, space.all_atoms(), [ctx.section() for _ in range(20)], tol)
    return [
        _prop("orthogonal_additivity", ok, max_residual=worst, samples=100),
        _prop("disjoint_cross_terms", cross <= tol.absolute, max_abs=cross, samples=100),
        _prop("sigma_boundedness", sigma_ok, worst_ratio=sigma_worst, samples=10),
        _prop("density_reconstruction", recon <= tol.relative, max_rel_residual=recon, samples=200),
        _prop("finite_measure_bound", bound_ok, worst_ratio=ratio, samples=20),
    ]


def suite_tails(ctx: CheckContext) -> list:
    model = geometric_model(60)
    report = check_tail_vanishing(model.form, model.phi, model.tails(20), tolerance=tail_bound(20))
    bounds = [tail_bound(n) for n in range(1, 21)]
    geometric_ok = all(v <= b for v, b in zip(report.values, bounds))

    space = ctx.form.layout.space
    tails = [IndexSet(frozenset(space.atoms[i:])) for i in range(len(space) + 1)]
    finite = check_tail_vanishing(ctx.form, ctx.section(), tails)
    return [
        _prop("geometric_tail_bound", geometric_ok, values=list(report.values), bounds=bounds),
        _prop("finite_support_tail", finite.values[-1] == 0.0, values=list(finite.values),
              first_below=finite.first_below),
    ]


def suite_closability(ctx: CheckContext) -> list:
    family, verdict = spike_family(8)
    norms_sq = [n * n for n in verdict.witness.norms] if verdict.witness else []
    diffs = max((abs(d) for _, _, d in verdict.witness.differences), default=0.0) if verdict.witness else None
    values = list(verdict.witness.values) if verdict.witness else []

    phi = ctx.section()
    scaling = closability_probe(ctx.form, [phi * (1.0 / n) for n in range(1, 9)])
    return [
        _prop("spike_family_violation", verdict.status == "violation", expected="violation", status=verdict.status,
              norms_squared=norms_sq, max_pair_difference=diffs, values=values, levels=list(family.levels)),
        _prop("scaling_sequence_consistent", scaling.status == "consistent", status=scaling.status),
    ]


def suite_csb(ctx: CheckContext) -> list:
    spectral = ctx.spectral
    layout = ctx.form.layout
    zero = make_section(layout, {})
    samples = [(ctx.section(), ctx.section()) for _ in range(500)] + [(zero, ctx.section())]
    verdict = csb_check(ctx.form, lambda phi: graph_norm_squared(spectral, phi), 1.0, samples, ctx.tol)
    return [_prop("generalized_cauchy_schwarz", verdict.passed, M=1.0, worst_excess=verdict.worst_excess,
                  failures=verdict.failures, samples=len(samples))]


def suite_norms(ctx: CheckContext) -> list:
    spectral = ctx.spectral
    m = max(0.0, -spectral.spectrum_min)
    verdict = norm_equivalence_check(spectral, m, [ctx.section() for _ in range(100)], ctx.tol)
    return [_prop("norm_equivalence", verdict.passed, m=m, worst_upper=verdict.worst_upper,
                  worst_lower=verdict.worst_lower, samples=100)]


def suite_dfin(ctx: CheckContext) -> list:
    spectral = ctx.spectral
    monotone, reaches_zero, trails = True, True, []
    for _ in range(10):
        steps = dfin_approximation(spectral, ctx.section(0.8), 5)
        dist = [s.distance for s in steps]
        graph = [s.graph_distance for s in steps]
        for seq in (dist, graph):
            if any(b > a * (1.0 + ctx.tol.relative) + ctx.tol.absolute for a, b in zip(seq, seq[1:])):
                monotone = False
        reaches_zero = reaches_zero and dist[-1] == 0.0 and graph[-1] == 0.0
        trails.append(graph)
    return [_prop("dfin_distances_nonincreasing", monotone, graph_distances=trails),
            _prop("dfin_reaches_section", reaches_zero)]


def suite_reverse(ctx: CheckContext) -> list:
    rng = ctx.rng
    matrix = random_hermitian(rng, rng.uniform(-5.0, 5.0, size=8))
    model = spectral_partition_model(matrix, ctx.tol)
    space = model.form.layout.space
    vectors = [_random_vector(rng, 8) for _ in range(20)]
    deltas = [random_index_set(rng, space) for _ in range(5)]
    partitions = [random_partition(rng, space) for _ in range(3)]
    report = reverse_check(model, vectors, deltas, partitions, ctx.tol)
    return [_prop("spectral_partition_identities", report.passed(ctx.tol), cells=list(model.cells),
                  quadratic_residual=report.quadratic_residual, projection_residual=report.projection_residual,
                  moments_monotone=report.moments_monotone, additivity=report.additivity_ok)]


SUITE_RUNNERS = {
    "oa": suite_oa,
    "tails": suite_tails,
    "closability": suite_closability,
    "csb": suite_csb,
    "norms": suite_norms,
    "dfin": suite_dfin,
    "reverse": suite_reverse,
}


def cmd_check(suite: str, config: Optional[ModelConfig], seed: int, tol: Tolerances, writer: ReportWriter,
              out: Optional[str] = None, workers: int = 1) -> int:
    """Run one property suite on the configured model (default: an 8-atom random model)."""
    if suite not in SUITE_RUNNERS:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    if config is not None:
        form, kind, tol = materialize(config).form, config.kind, config.tolerances
    else:
        form, kind = random_model(seed, 8, 4, (-10.0, 10.0)).form, "random"
    ctx = CheckContext(form, np.random.default_rng(seed), tol, workers)
    properties = SUITE_RUNNERS[suite](ctx)
    passed = all(p["passed"] for p in properties)
    body = {"suite": suite, "model": {"kind": kind, "atoms": len(form.layout.space),
                                      "total_dim": form.layout.total_dim},
            "properties": properties, "passed": passed}
    writer.write(writer.document("check", seed, body, {"suite": suite}), out)
    for p in properties:
        if not p["passed"]:
            log.warning("property %s failed", p["property"])
    return 0 if passed else 1


# ---------- group ----------
def cmd_group(group_ref: str, coefficients: Optional[list], seed: int, tol: Tolerances, writer: ReportWriter,
              out: Optional[str] = None, side: str = "right", workers: int = 1) -> int:
    group = load_group(group_ref)
    rep = regular_rep(group)
    decomposition = isotypic_decomposition(rep, seed, tol)
    rng = np.random.default_rng(seed)
    if coefficients is None:
        coefficients = random_invariant_coefficients(group, rng)
    elif len(coefficients) != group.order:
        raise ConfigError(f"{len(coefficients)} coefficients for a group of order {group.order}")
    invariant = make_invariant_form(group, coefficients, decomposition, side=side, tol=tol)
    spectral = decompose(invariant.form, tol, workers)
    eigenvalues = scipy.linalg.eigvalsh(invariant.operator)

    vectors = [_random_vector(rng, group.order) for _ in range(20)]
    invariance = invariance_check(invariant, rep, vectors, tol)
    labels = decomposition.labels
    pairs = list(zip(vectors, vectors[1:] + vectors[:1]))
    cross = max((cross_isotypic_vanish(invariant, decomposition, {a}, {b}, pairs)
                 for i, a in enumerate(labels) for b in labels[i + 1:]), default=0.0)
    disjoint = max((intertwiner_space(restrict_rep(rep, decomposition, a), restrict_rep(rep, decomposition, b),
                                      tol).dimension
                    for i, a in enumerate(labels) for b in labels[i + 1:]), default=0)

    sections = [invariant.to_section(v) for v in vectors]
    reports = [verify_representation(spectral, phi, dfin_witness(spectral, phi), tol) for phi in sections]
    additive = all(check_orthogonal_additivity(invariant.form, phi, singletons(invariant.form.layout.space), tol).passed
                   for phi in sections)
    verdicts = {v: sum(r.verdict == v for r in reports) for v in ("strong", "weak", "fail")}

    passed = invariance.passed and cross <= tol.representation and not verdicts["fail"] and additive and disjoint == 0
    body = {
        "group": {"name": group.name, "order": group.order,
                  "class_sizes": [len(c) for c in conjugacy_classes(group)]},
        "decomposition": {"labels": list(labels), "ranks": list(decomposition.dims),
                          "multiplicities": list(decomposition.multiplicity), "attempts": decomposition.attempts,
                          "residuals": decomposition.residuals, "max_intertwiner_dimension": disjoint},
        "operator": {"coefficients": list(invariant.coefficients), "eigenvalues": list(eigenvalues),
                     "non_semibounded": bool(eigenvalues[0] < 0 < eigenvalues[-1]),
                     "leakage": invariant.leakage},
        "invariance": {"residual": invariance.residual, "sesquilinear_residual": invariance.sesquilinear_residual,
                       "passed": invariance.passed},
        "cross_term_max": cross,
        "orthogonal_additivity": additive,
        "representation": {"count": len(reports), **verdicts,
                           "max_rel_error": max((r.rel_error for r in reports), default=0.0)},
        "passed": passed,
    }
    writer.write(writer.document("group", seed, body, {"side": side}), out)
    if not passed:
        log.warning("group %s: invariant-form checks failed", group.name)
    return 0 if passed else 1
