"""Dense primitives for the reduced solver: skinny QR, small SVD, triangular solves.

These delegate to LAPACK through NumPy/SciPy; the wrappers pin down the
contracts the solver relies on (sign convention, determinism, error
behavior).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = ["QrFactors", "SvdFactors", "SingularTriangular", "qr_skinny", "svd_small", "tri_solve"]


class SingularTriangular(ValueError):
    """Triangular solve requested with a zero diagonal entry."""


@dataclass
class QrFactors:
    """W = q @ r with orthonormal q columns and nonnegative diag(r)."""

    q: np.ndarray
    r: np.ndarray

    @property
    def diag_min(self) -> float:
        """Smallest |r_ii|; near-zero values flag rank deficiency."""
        return float(np.min(np.abs(np.diag(self.r))))


@dataclass
class SvdFactors:
    """B = u @ diag(sigma) @ vt with sigma nonincreasing and nonnegative."""

    u: np.ndarray
    sigma: np.ndarray
    vt: np.ndarray


def qr_skinny(w) -> QrFactors:
    """Reduced QR of a tall matrix, normalized so diag(R) >= 0.

    Deterministic: identical input gives bit-identical factors. Rank
    deficiency is not an error; callers inspect ``diag_min``.
    """
    w = np.asarray(w, dtype=np.float64)
    n, k = w.shape
    if not n >= k >= 1:
        raise ValueError(f"need n >= k >= 1, got shape {w.shape}")
    q, r = np.linalg.qr(w)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return QrFactors(q=q * signs, r=signs[:, None] * r)


def svd_small(b) -> SvdFactors:
    """Full SVD of a small square matrix."""
    b = np.asarray(b, dtype=np.float64)
    u, sigma, vt = np.linalg.svd(b)
    return SvdFactors(u=u, sigma=sigma, vt=vt)


def tri_solve(r, b, transposed: bool = False) -> np.ndarray:
    """Solve R x = b (or R^T x = b) for upper-triangular R."""
    r = np.asarray(r, dtype=np.float64)
    if np.any(np.diag(r) == 0.0):
        raise SingularTriangular("zero diagonal entry in triangular matrix")
    return scipy.linalg.solve_triangular(r, b, trans=1 if transposed else 0, lower=False)
