"""Exact cell integration of the temporal kernel |s - t|^(2H-2).

All grid quantities are built from the second antiderivative
Phi(u) = |u|^(2H) / (2H (2H-1)), so the diagonal singularity is handled
by exact inclusion-exclusion over cell corners rather than pointwise
kernel evaluation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import InvalidParameterError

__all__ = ["TemporalKernel", "kernel_lag_weights", "cell_kernel_table", "export_weight_table"]


@dataclass(frozen=True)
class TemporalKernel:
    """Kernel |s-t|^(2H-2) on [0, T], H in (1/2, 1)."""

    H: float
    T: float

    def __post_init__(self):
        if not (0.5 < self.H < 1.0):
            raise InvalidParameterError(f"H must lie in (1/2, 1), got {self.H}")
        if self.T <= 0:
            raise InvalidParameterError("horizon T must be positive")


def _phi(u: np.ndarray, H: float) -> np.ndarray:
    return np.abs(u) ** (2.0 * H) / (2.0 * H * (2.0 * H - 1.0))


def kernel_lag_weights(H: float, dt: float, n_lags: int) -> np.ndarray:
    """w[k] = exact double integral of |s-t|^(2H-2) over a cell pair at lag k.

    w[0] is the cell self-weight dt^(2H) / (H (2H-1)).
    """
    if not (0.5 < H < 1.0):
        raise InvalidParameterError(f"H must lie in (1/2, 1), got {H}")
    k = np.arange(n_lags, dtype=float)
    w = _phi((k + 1) * dt, H) - 2.0 * _phi(k * dt, H) + _phi((k - 1) * dt, H)
    return w


def cell_kernel_table(kernel: TemporalKernel, n_cells: int) -> np.ndarray:
    """Symmetric Gram table W with W[i, j] = int int over cell_i x cell_j."""
    if n_cells < 1:
        raise InvalidParameterError("n_cells must be >= 1")
    dt = kernel.T / n_cells
    return toeplitz(kernel_lag_weights(kernel.H, dt, n_cells))


def export_weight_table(path, w: np.ndarray) -> None:
    """Audit dump of a Gram table as CSV rows (i, j, W_ij)."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["i", "j", "W_ij"])
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                out.writerow([i, j, format(w[i, j], ".17g")])
