"""Regularization operators: identity, scaled difference matrices, Kronecker stacks.

``L1`` is (1/2) * bidiag(1, -1) of shape (n-1, n) and ``L2`` is
(1/4) * tridiag(-1, 2, -1) of shape (n-2, n); the scale factors are kept
exactly as printed in the source matrices. The 2-D variants stack
``[I (x) L_d; L_d (x) I]`` in that order and act on vectors of length n^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["RegMatrix", "build", "build_kron"]

_KINDS = ("l0", "l1", "l2")


@dataclass
class RegMatrix:
    """Sparse regularization operator L of shape (p, n)."""

    kind: str
    structure: str  # identity | banded | kron_stack
    p: int
    n: int
    mat: sp.csr_matrix

    def apply(self, x) -> np.ndarray:
        """L @ x for a vector or an (n, k) block; cost O(nnz(L) * k)."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[0] != self.n:
            raise ValueError(f"operand has leading dimension {x.shape[0]}, expected {self.n}")
        return np.asarray(self.mat @ x)

    def dense(self) -> np.ndarray:
        return self.mat.toarray()


def _banded(kind: str, n: int) -> sp.csr_matrix:
    if kind == "l0":
        return sp.identity(n, format="csr")
    if kind == "l1":
        if n < 2:
            raise ValueError("l1 requires n >= 2")
        ones = np.ones(n - 1)
        return 0.5 * sp.diags([ones, -ones], [0, 1], shape=(n - 1, n), format="csr")
    if kind == "l2":
        if n < 3:
            raise ValueError("l2 requires n >= 3")
        ones = np.ones(n - 2)
        return 0.25 * sp.diags(
            [-ones, 2.0 * ones, -ones], [0, 1, 2], shape=(n - 2, n), format="csr"
        )
    raise ValueError(f"unknown regularizer kind {kind!r}; expected one of {_KINDS}")


def build(kind: str, n: int) -> RegMatrix:
    """One-dimensional regularizer of the given kind for problem size n."""
    kind = kind.lower()
    mat = _banded(kind, n)
    structure = "identity" if kind == "l0" else "banded"
    return RegMatrix(kind=kind, structure=structure, p=mat.shape[0], n=n, mat=mat)


def build_kron(kind: str, grid_n: int) -> RegMatrix:
    """Two-dimensional stack [I (x) L_d; L_d (x) I] on a grid_n x grid_n grid.

    Operates on vectors of length grid_n**2. For kind ``l0`` the stack
    degenerates to [I; I].
    """
    kind = kind.lower()
    if grid_n < 3:
        raise ValueError("kron stack requires grid_n >= 3")
    base = _banded(kind, grid_n)
    eye = sp.identity(grid_n, format="csr")
    mat = sp.vstack([sp.kron(eye, base), sp.kron(base, eye)], format="csr")
    n = grid_n * grid_n
    return RegMatrix(kind=f"{kind}kron", structure="kron_stack", p=mat.shape[0], n=n, mat=mat)
