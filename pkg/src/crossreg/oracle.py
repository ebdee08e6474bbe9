"""Entry-level access to the system matrix with evaluation bookkeeping.

The whole solver only ever touches the matrix through an :class:`EntryOracle`,
so the number of entries actually evaluated can be reported exactly. Indices
are zero-based internally; anything user-facing converts to one-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["EntryOracle", "EvalCounter", "dense_oracle", "grid_kernel_oracle", "kron_oracle"]


@dataclass(frozen=True)
class EvalCounter:
    """Snapshot of how many matrix entries have been requested."""

    unique_entries: int
    total_calls: int


class EntryOracle:
    """Deterministic map ``(i, j) -> A_ij`` with exact evaluation counting.

    ``entry_fn`` must be a pure function of its indices. The optional
    vectorized hooks (``row_fn(i)``, ``col_fn(j)``, ``pairs_fn(ii, jj)``)
    avoid per-entry Python calls; counting is identical either way.
    """

    def __init__(self, nrows, ncols, entry_fn, row_fn=None, col_fn=None, pairs_fn=None):
        if nrows < 1 or ncols < 1:
            raise ValueError("oracle dimensions must be positive")
        self.nrows = int(nrows)
        self.ncols = int(ncols)
        self._entry_fn: Callable = entry_fn
        self._row_fn = row_fn
        self._col_fn = col_fn
        self._pairs_fn = pairs_fn
        self._full_rows: set[int] = set()
        self._full_cols: set[int] = set()
        self._codes: set[int] = set()
        self._total = 0

    @property
    def shape(self):
        return (self.nrows, self.ncols)

    def _check_row(self, i):
        if not 0 <= i < self.nrows:
            raise IndexError(f"row index {i} out of range [0, {self.nrows})")

    def _check_col(self, j):
        if not 0 <= j < self.ncols:
            raise IndexError(f"column index {j} out of range [0, {self.ncols})")

    def entry(self, i, j):
        """Single entry A_ij."""
        i, j = int(i), int(j)
        self._check_row(i)
        self._check_col(j)
        self._codes.add(i * self.ncols + j)
        self._total += 1
        return float(self._entry_fn(i, j))

    def row(self, i):
        """Row i of A as a fresh float64 vector; counts ncols evaluations."""
        i = int(i)
        self._check_row(i)
        if self._row_fn is not None:
            v = np.asarray(self._row_fn(i), dtype=np.float64).copy()
        else:
            v = np.fromiter(
                (self._entry_fn(i, j) for j in range(self.ncols)),
                dtype=np.float64,
                count=self.ncols,
            )
        self._full_rows.add(i)
        self._total += self.ncols
        return v

    def col(self, j):
        """Column j of A; counts nrows evaluations."""
        j = int(j)
        self._check_col(j)
        if self._col_fn is not None:
            v = np.asarray(self._col_fn(j), dtype=np.float64).copy()
        else:
            v = np.fromiter(
                (self._entry_fn(i, j) for i in range(self.nrows)),
                dtype=np.float64,
                count=self.nrows,
            )
        self._full_cols.add(j)
        self._total += self.nrows
        return v

    def entries(self, rows, cols):
        """Entries at scattered positions (vectorized when possible)."""
        rows = np.asarray(rows, dtype=np.intp)
        cols = np.asarray(cols, dtype=np.intp)
        if rows.shape != cols.shape:
            raise ValueError("rows and cols must have matching shapes")
        if rows.size and (rows.min() < 0 or rows.max() >= self.nrows):
            raise IndexError("row index out of range")
        if cols.size and (cols.min() < 0 or cols.max() >= self.ncols):
            raise IndexError("column index out of range")
        if self._pairs_fn is not None:
            v = np.asarray(self._pairs_fn(rows, cols), dtype=np.float64).copy()
        else:
            v = np.fromiter(
                (self._entry_fn(int(i), int(j)) for i, j in zip(rows, cols)),
                dtype=np.float64,
                count=rows.size,
            )
        self._codes.update((rows * self.ncols + cols).tolist())
        self._total += rows.size
        return v

    @property
    def counter(self) -> EvalCounter:
        nr, nc = self.nrows, self.ncols
        r, c = len(self._full_rows), len(self._full_cols)
        unique = nc * r + nr * c - r * c
        for code in self._codes:
            i, j = divmod(code, nc)
            if i not in self._full_rows and j not in self._full_cols:
                unique += 1
        return EvalCounter(unique_entries=unique, total_calls=self._total)


def dense_oracle(matrix) -> EntryOracle:
    """Wrap an in-memory matrix as an oracle (verification path for small n)."""
    a = np.asarray(matrix, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError("matrix must be two-dimensional")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix must be finite-valued")
    return EntryOracle(
        a.shape[0],
        a.shape[1],
        entry_fn=lambda i, j: a[i, j],
        row_fn=lambda i: a[i, :],
        col_fn=lambda j: a[:, j],
        pairs_fn=lambda ii, jj: a[ii, jj],
    )


def grid_kernel_oracle(s, t, weight, kappa) -> EntryOracle:
    """Oracle for a quadrature-discretized kernel: A_ij = weight * kappa(s_i, t_j).

    ``kappa`` must broadcast over NumPy arrays.
    """
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    w = float(weight)
    return EntryOracle(
        s.size,
        t.size,
        entry_fn=lambda i, j: w * kappa(s[i], t[j]),
        row_fn=lambda i: w * kappa(s[i], t),
        col_fn=lambda j: w * kappa(s, t[j]),
        pairs_fn=lambda ii, jj: w * kappa(s[ii], t[jj]),
    )


def kron_oracle(b) -> EntryOracle:
    """Oracle for the Kronecker product B (x) B without forming it.

    Index split: global i = i1 * nb + i2, so entry(i, j) = B[i1, j1] * B[i2, j2].
    """
    b = np.asarray(b, dtype=np.float64)
    nb = b.shape[0]
    if b.ndim != 2 or b.shape[1] != nb:
        raise ValueError("base matrix must be square")
    n = nb * nb

    def pairs(ii, jj):
        i1, i2 = np.divmod(ii, nb)
        j1, j2 = np.divmod(jj, nb)
        return b[i1, j1] * b[i2, j2]

    return EntryOracle(
        n,
        n,
        entry_fn=lambda i, j: b[i // nb, j // nb] * b[i % nb, j % nb],
        row_fn=lambda i: np.kron(b[i // nb, :], b[i % nb, :]),
        col_fn=lambda j: np.kron(b[:, j // nb], b[:, j % nb]),
        pairs_fn=pairs,
    )
