"""
A Hermitian matrix T as a direct-integral form over ℤ.

The real line is cut into the cells I_k = [k, k+1); the fiber over k is the
spectral subspace ran E(I_k) of T and H_k is T restricted to it, so that
⟨v, Tv⟩ = Q(to_section(v)) and P_Δ corresponds to E(⊔_{k∈Δ} I_k).
"""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from forms.quadratic_form import DirectIntegralForm, check_orthogonal_additivity, eval_q, hermitian_residual, make_form
from forms.spectral import SpectralModel, decompose, global_measure, moments
from parameter import Tolerances, resolve
from spaces.direct_integral import Section, make_layout, make_section, project
from spaces.measure_space import IndexSet, counting_space
from utils.errors import NonHermitianForm
from utils.log import get_logger

log = get_logger("models")


@dataclass(frozen=True, eq=False)
class SpectralPartitionModel:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    cells: tuple
    bases: tuple
    form: DirectIntegralForm

    def to_section(self, vector) -> Section:
        v = np.asarray(vector, dtype=complex)
        return make_section(self.form.layout, {k: b.conj().T @ v for k, b in zip(self.cells, self.bases)})

    def from_section(self, phi: Section) -> np.ndarray:
        out = np.zeros(self.matrix.shape[0], dtype=complex)
        for k, b in zip(self.cells, self.bases):
            out = out + b @ phi.vector(k)
        return out

    def spectral_projection(self, delta: IndexSet) -> np.ndarray:
        """E(⊔_{k∈Δ} I_k) as a matrix on ℂᴺ."""
        n = self.matrix.shape[0]
        out = np.zeros((n, n), dtype=complex)
        for k, b in zip(self.cells, self.bases):
            if k in delta:
                out = out + b @ b.conj().T
        return out


def spectral_partition_model(matrix, tol: Optional[Tolerances] = None) -> SpectralPartitionModel:
    tol = resolve(tol)
    t = np.array(matrix, dtype=complex)
    if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] == 0:
        raise ValueError(f"expected a nonempty square matrix, got shape {t.shape}")
    residual = hermitian_residual(t)
    if residual > tol.hermitian * (1.0 + float(np.max(np.abs(t)))):
        raise NonHermitianForm("matrix", residual)
    eigenvalues, vectors = scipy.linalg.eigh(t)
    cell_of = np.floor(eigenvalues).astype(int)
    cells = tuple(int(k) for k in np.unique(cell_of))
    bases = tuple(vectors[:, cell_of == k] for k in cells)
    blocks = [np.diag(eigenvalues[cell_of == k]) for k in cells]

    space = counting_space(cells, "cells I_k = [k, k+1) meeting the spectrum")
    layout = make_layout(space, [b.shape[1] for b in bases])
    form = make_form(layout, blocks, tol=tol)
    log.debug("spectral partition: %d cells for a %dx%d matrix", len(cells), *t.shape)
    return SpectralPartitionModel(t, eigenvalues, cells, bases, form)


@dataclass(frozen=True)
class ReverseReport:
    quadratic_residual: float
    projection_residual: float
    moments_monotone: bool
    additivity_ok: bool

    def passed(self, tol: Tolerances) -> bool:
        return (self.quadratic_residual <= tol.representation and self.projection_residual <= tol.representation
                and self.moments_monotone and self.additivity_ok)


def reverse_check(model: SpectralPartitionModel, vectors: Sequence[np.ndarray], deltas: Sequence[IndexSet],
                  partitions: Sequence, tol: Optional[Tolerances] = None) -> ReverseReport:
    """
    Relative residuals of ⟨v,Tv⟩ = Q(to_section(v)) and from_section(P_Δ to_section(v)) = E(⊔I_k)v,
    monotonicity of the first absolute and second moments of ν_{P_ΔΦ} and
    orthogonal additivity over the given partitions.
    """
    tol = resolve(tol)
    spectral: SpectralModel = decompose(model.form, tol)
    quad = proj = 0.0
    monotone = additive = True
    for v in vectors:
        v = np.asarray(v, dtype=complex)
        phi = model.to_section(v)
        direct = float(np.vdot(v, model.matrix @ v).real)
        quad = max(quad, abs(direct - eval_q(model.form, phi)) / (1.0 + abs(direct)))
        full = moments(global_measure(spectral, phi))
        for delta in deltas:
            lhs = model.from_section(project(delta, phi))
            rhs = model.spectral_projection(delta) @ v
            proj = max(proj, float(np.linalg.norm(lhs - rhs)) / (1.0 + float(np.linalg.norm(v))))
            part = moments(global_measure(spectral, project(delta, phi)))
            slack = 1.0 + tol.relative
            if part[1] > full[1] * slack + tol.absolute or part[2] > full[2] * slack + tol.absolute:
                monotone = False
        for partition in partitions:
            if not check_orthogonal_additivity(model.form, phi, partition, tol).passed:
                additive = False
    return ReverseReport(quad, proj, monotone, additive)
