"""Grid discretization of the Hilbert space with inner product
<f, g> = int int f(s) g(t) |s-t|^(2H-2) ds dt.

A step-function orthonormal basis comes from the spectral decomposition of
the exact cell Gram table; ordering by descending eigenvalue puts the most
kernel energy in the leading coordinates.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConditioningError, GridMismatchError, InvalidParameterError
from .kernels import TemporalKernel, cell_kernel_table
from .local_time import LocalTimeProfile

__all__ = [
    "GridBasis",
    "NoiseDraw",
    "CoordinateVector",
    "h_inner",
    "build_onb",
    "m_coordinates",
    "m_coordinate_matrix",
    "sample_noise",
    "export_basis",
]


@dataclass(frozen=True)
class GridBasis:
    """Step-function orthonormal basis on a uniform grid of [0, T].

    basis_coeffs[k] holds c_k with e_k = sum_j c_(k,j) 1_(cell_j); the rows
    satisfy c_i^T W c_j = delta_ij.  tilde_values[k][j] is the cell average
    of the kernel-smoothed basis function (W c_k)_j / dt.
    """

    kernel: TemporalKernel
    n_cells: int
    dt: float
    gram: np.ndarray = field(repr=False)
    basis_coeffs: np.ndarray = field(repr=False)
    tilde_values: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def n_basis(self) -> int:
        return self.basis_coeffs.shape[0]

    @property
    def tilde_sup(self) -> np.ndarray:
        """Per-function bound max_j |tilde_values[k][j]| (each is finite)."""
        return np.abs(self.tilde_values).max(axis=1)


@dataclass(frozen=True)
class NoiseDraw:
    """Standard normal noise coordinates xi_1..xi_n."""

    xs: np.ndarray

    def __len__(self) -> int:
        return len(self.xs)


@dataclass(frozen=True)
class CoordinateVector:
    """Path coordinates m_k(t); partial sums of m_k^2 are nondecreasing."""

    ms: np.ndarray
    source: str

    def partial_energy(self, n: int) -> float:
        return float(np.sum(self.ms[:n] ** 2))


def h_inner(f: np.ndarray, g: np.ndarray, gram: np.ndarray) -> float:
    """f^T W g for cell-value vectors on the Gram table's grid."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != (gram.shape[0],) or g.shape != (gram.shape[0],):
        raise GridMismatchError("cell-value vectors must match the Gram dimension")
    return float(f @ gram @ g)


def build_onb(kernel: TemporalKernel, n_cells: int, n_basis: int | None = None) -> GridBasis:
    """Orthonormal basis from W = U Lambda U^T with eigenvalues descending:
    c_k = u_k lambda_k^(-1/2).  Raises ConditioningError if any retained
    eigenvalue is numerically non-positive."""
    if n_basis is None:
        n_basis = n_cells
    if not (1 <= n_basis <= n_cells):
        raise InvalidParameterError("need 1 <= n_basis <= n_cells")
    w = cell_kernel_table(kernel, n_cells)
    lam, u = np.linalg.eigh(w)
    lam, u = lam[::-1], u[:, ::-1]
    if lam[n_basis - 1] <= 0 or lam[n_basis - 1] < 1e-14 * lam[0]:
        raise ConditioningError(
            f"Gram table numerically non-positive at rank {n_basis} "
            f"(eigenvalue {lam[n_basis - 1]:.3e})"
        )
    coeffs = (u[:, :n_basis] / np.sqrt(lam[:n_basis])).T
    dt = kernel.T / n_cells
    tilde = coeffs @ w / dt
    return GridBasis(
        kernel=kernel,
        n_cells=n_cells,
        dt=dt,
        gram=w,
        basis_coeffs=coeffs,
        tilde_values=tilde,
        eigenvalues=lam[:n_basis],
    )


def m_coordinates(profile: LocalTimeProfile, basis: GridBasis, up_to: float | None = None) -> CoordinateVector:
    """m_k = sum over cells with left endpoint < up_to of tilde_k[j] * ell_j."""
    if profile.n_cells != basis.n_cells or abs(profile.dt - basis.dt) > 1e-12 * basis.dt:
        raise GridMismatchError("profile and basis must share the grid")
    if up_to is None:
        up_to = basis.kernel.T
    if up_to > basis.kernel.T + 1e-12:
        raise InvalidParameterError("up_to exceeds the basis horizon")
    j_max = int(np.searchsorted(np.arange(basis.n_cells) * basis.dt, up_to - 1e-12 * basis.dt, side="right"))
    ms = basis.tilde_values[:, :j_max] @ profile.increments[:j_max]
    return CoordinateVector(ms=ms, source=f"profile eps={profile.epsilon}")


def m_coordinate_matrix(increments: np.ndarray, basis: GridBasis) -> np.ndarray:
    """(n_paths, n_basis) coordinate array for a batch of increment rows."""
    if increments.shape[-1] != basis.n_cells:
        raise GridMismatchError("increment rows must match the basis grid")
    return increments @ basis.tilde_values.T


def sample_noise(n: int, rng: np.random.Generator) -> NoiseDraw:
    if n < 0:
        raise InvalidParameterError("n must be nonnegative")
    return NoiseDraw(xs=rng.standard_normal(n))


def export_basis(path, basis: GridBasis) -> None:
    """Audit dump: rows (k, cell, coefficient, tilde_value)."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["k", "cell", "coefficient", "tilde_value"])
        for k in range(basis.n_basis):
            for j in range(basis.n_cells):
                out.writerow(
                    [k, j, format(basis.basis_coeffs[k, j], ".17g"), format(basis.tilde_values[k, j], ".17g")]
                )
