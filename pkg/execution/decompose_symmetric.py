#!/usr/bin/env python3
"""
Symmetric Matrix Decomposition
==============================
Small dense symmetric matrices and their spectra.

Usage:
    from decompose_symmetric import SymMatrix, sym_eigenvalues

    G = SymMatrix.from_dense([[0.5, -0.5], [-0.5, 0.5]])
    sym_eigenvalues(G)
    # array([0., 1.])

Gram matrices here are c x c with c at most a few dozen, so a cyclic Jacobi
sweep is accurate and fast enough; no LAPACK call is needed.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from dfm_errors import NumericInputError, ParameterError

JACOBI_REL_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100


@dataclass(frozen=True)
class SymMatrix:
    """
    Dense symmetric matrix stored as its packed upper triangle.

    Symmetry is exact by construction: both triangles of `dense` are read
    from the same storage.
    """

    order: int
    packed: np.ndarray

    def __post_init__(self):
        if self.order < 1:
            raise ParameterError(f"order must be positive, got {self.order}")
        object.__setattr__(self, "packed", np.array(self.packed, dtype=np.float64))
        expected = self.order * (self.order + 1) // 2
        if self.packed.shape != (expected,):
            raise ParameterError(
                f"packed storage of order {self.order} needs {expected} entries, "
                f"got shape {self.packed.shape}"
            )
        self.packed.setflags(write=False)

    @classmethod
    def from_dense(cls, matrix) -> "SymMatrix":
        """Build from a square array, keeping its upper triangle."""
        a = np.asarray(matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError(f"expected a square matrix, got shape {a.shape}")
        rows, cols = np.triu_indices(a.shape[0])
        return cls(order=a.shape[0], packed=a[rows, cols].copy())

    @property
    def dense(self) -> np.ndarray:
        out = np.empty((self.order, self.order))
        rows, cols = np.triu_indices(self.order)
        out[rows, cols] = self.packed
        out[cols, rows] = self.packed
        return out

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.dense)

    def trace(self) -> float:
        return float(np.sum(self.diagonal))

    def frobenius_norm(self) -> float:
        return float(np.linalg.norm(self.dense))

    def augmented(self) -> "SymMatrix":
        """Same matrix with a leading zero row and column."""
        out = np.zeros((self.order + 1, self.order + 1))
        out[1:, 1:] = self.dense
        return SymMatrix.from_dense(out)

    def permuted(self, perm) -> "SymMatrix":
        perm = np.asarray(perm)
        return SymMatrix.from_dense(self.dense[np.ix_(perm, perm)])


# ============================================
# Jacobi eigen solver
# ============================================

def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.triu(a, 1) ** 2) * 2.0))


def sym_eigh(matrix: SymMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigen decomposition by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvectors as columns) with
    M = Q diag(w) Q'.

    Raises:
        NumericInputError: matrix holds NaN or infinite entries
    """
    a = matrix.dense
    if not np.all(np.isfinite(a)):
        raise NumericInputError("symmetric matrix has non-finite entries")

    n = matrix.order
    v = np.eye(n)
    scale = float(np.linalg.norm(a))
    threshold = JACOBI_REL_TOL * scale

    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_diagonal_norm(a) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                # smaller root of t^2 + 2 t theta - 1 = 0
                if theta >= 0.0:
                    t = 1.0 / (theta + np.hypot(theta, 1.0))
                else:
                    t = -1.0 / (-theta + np.hypot(theta, 1.0))
                c = 1.0 / np.hypot(t, 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q

                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


def sym_eigenvalues(matrix: SymMatrix) -> np.ndarray:
    """Eigenvalues in ascending order."""
    return sym_eigh(matrix)[0]


# ============================================
# Small solves
# ============================================

def pseudo_solve(matrix: SymMatrix, rhs, rel_cutoff: float = 1e-12) -> Tuple[np.ndarray, int]:
    """
    Minimum-norm least-squares solution of M x = rhs for PSD M.

    Eigenvalues below rel_cutoff * largest are treated as zero.

    Returns:
        (solution, numerical rank)
    """
    w, q = sym_eigh(matrix)
    rhs = np.asarray(rhs, dtype=np.float64)
    top = max(float(np.max(np.abs(w))), 0.0)
    keep = w > rel_cutoff * top if top > 0 else np.zeros_like(w, dtype=bool)
    coords = q.T @ rhs
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return q @ (inv * coords), int(np.count_nonzero(keep))


def condition_number(matrix: SymMatrix) -> float:
    """Spectral condition number of a PSD matrix (inf when singular)."""
    w = sym_eigenvalues(matrix)
    if w[0] <= 0.0:
        return float("inf")
    return float(w[-1] / w[0])


# ============================================
# CLI Interface
# ============================================

def main():
    """Print the spectrum of a matrix given as comma-separated rows."""
    import argparse

    parser = argparse.ArgumentParser(description="Eigenvalues of a symmetric matrix")
    parser.add_argument("rows", nargs="+", help='Rows, e.g. "1,0" "0,2"')
    args = parser.parse_args()

    matrix = SymMatrix.from_dense([[float(x) for x in row.split(",")] for row in args.rows])
    for value in sym_eigenvalues(matrix):
        print(format(value, ".17g"))


if __name__ == "__main__":
    main()
