"""Adaptive cross approximation with a running sampled error estimate.

Each step evaluates exactly one row and one column of the matrix, appends a
rank-one skeleton ``wc * wr^T``, and downdates the residual values stored at
the random probe positions. The probe residuals drive the Frobenius-norm
estimate used by the stopping rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import core
from .oracle import EntryOracle

__all__ = [
    "AcaModel",
    "ProbeSet",
    "ErrorEstimate",
    "RankExhausted",
    "init",
    "step",
    "estimate_error",
    "materialize",
]

# A pivot is rejected when it falls below this fraction of the first pivot.
PIVOT_RTOL = 1e-14
MAX_PIVOT_RETRIES = 3
# The row walk counts as stalled when the probe sum of squares has not
# dropped by STALL_DECAY over STALL_WINDOW steps; row selection then
# follows the largest probe residual for the rest of the run.
STALL_WINDOW = 8
STALL_DECAY = 0.9

_SAMPLE_DENSE_LIMIT = 1 << 22  # permutation sampling up to ~4M candidate cells


class RankExhausted(RuntimeError):
    """No usable pivot remains: the residual is numerically rank-zero."""


@dataclass
class ProbeSet:
    """Random matrix positions with their current residual values.

    ``values[l]`` always equals ``A[rows[l], cols[l]] - M_k[rows[l], cols[l]]``
    for the model the set has been updated alongside.
    """

    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    seed: int

    @property
    def t(self) -> int:
        return self.values.size


@dataclass
class ErrorEstimate:
    """Sampled estimate of the approximation error norm."""

    s_k: float
    mode: str


class AcaModel:
    """Rank-k cross approximation M_k = sum_l wc_l * wr_l^T.

    Skeleton vectors live in preallocated (capacity, n) arrays; ``wc_stack``
    and ``wr_stack`` expose contiguous (k, n) views.
    """

    def __init__(self, nrows: int, ncols: int, start_row: int = 0):
        if not 0 <= start_row < nrows:
            raise IndexError(f"start_row {start_row} out of range [0, {nrows})")
        self.nrows = nrows
        self.ncols = ncols
        self.start_row = start_row
        self.row_pivots: list[int] = []
        self.col_pivots: list[int] = []
        cap = 16
        self._wc = np.empty((cap, nrows))
        self._wr = np.empty((cap, ncols))
        self._used_rows = np.zeros(nrows, dtype=np.uint8)
        self._used_cols = np.zeros(ncols, dtype=np.uint8)
        self._first_pivot = 0.0
        self._probe_mode = False
        self._ss_history: list[float] = []

    @property
    def k(self) -> int:
        return len(self.row_pivots)

    @property
    def wc_stack(self) -> np.ndarray:
        """(k, nrows) stack of column-skeleton vectors."""
        return self._wc[: self.k]

    @property
    def wr_stack(self) -> np.ndarray:
        """(k, ncols) stack of row-skeleton vectors."""
        return self._wr[: self.k]

    @property
    def Wc(self) -> np.ndarray:
        """Column factor W^(c) of shape (nrows, k)."""
        return self.wc_stack.T

    @property
    def Wr(self) -> np.ndarray:
        """Row factor W^(r) of shape (ncols, k)."""
        return self.wr_stack.T

    def _grow(self):
        cap = 2 * self._wc.shape[0]
        wc = np.empty((cap, self.nrows))
        wr = np.empty((cap, self.ncols))
        wc[: self.k] = self.wc_stack
        wr[: self.k] = self.wr_stack
        self._wc, self._wr = wc, wr

    def _append(self, i_star: int, j_star: int, wc: np.ndarray, wr: np.ndarray, pivot: float):
        k = self.k
        if k == self._wc.shape[0]:
            self._grow()
        self._wc[k] = wc
        self._wr[k] = wr
        self.row_pivots.append(i_star)
        self.col_pivots.append(j_star)
        self._used_rows[i_star] = 1
        self._used_cols[j_star] = 1
        if k == 0:
            self._first_pivot = abs(pivot)


def _sample_distinct_positions(rng: np.random.Generator, nrows: int, ncols: int, t: int):
    """t distinct cells, uniform without replacement, deterministic per seed."""
    total = nrows * ncols
    if total <= _SAMPLE_DENSE_LIMIT:
        codes = rng.choice(total, size=t, replace=False)
    else:
        seen: set[int] = set()
        while len(seen) < t:
            draw = rng.integers(0, total, size=t - len(seen))
            seen.update(draw.tolist())
        codes = np.fromiter(seen, dtype=np.int64, count=t)
        codes.sort()
    rows = (codes // ncols).astype(np.intp)
    cols = (codes % ncols).astype(np.intp)
    return rows, cols


def init(oracle: EntryOracle, t: int, seed: int = 0, start_row: int = 0):
    """Create an empty model plus a seeded probe set of ``t`` distinct positions.

    The probe values start at the raw matrix entries (the rank-0 residual).
    Sampling uses NumPy's PCG64 generator, so runs are reproducible across
    platforms for a fixed seed.
    """
    total = oracle.nrows * oracle.ncols
    if not 1 <= t <= total:
        raise ValueError(f"probe count t={t} must be in [1, {total}]")
    rng = np.random.default_rng(seed)
    rows, cols = _sample_distinct_positions(rng, oracle.nrows, oracle.ncols, t)
    values = oracle.entries(rows, cols)
    model = AcaModel(oracle.nrows, oracle.ncols, start_row=start_row)
    return model, ProbeSet(rows=rows, cols=cols, values=values, seed=seed)


def _max_probe_row(model: AcaModel, probes: ProbeSet) -> int:
    """Unused row holding the largest probe residual, or -1."""
    live = model._used_rows[probes.rows] == 0
    cand = np.where(live, np.abs(probes.values), -1.0)
    idx = int(np.argmax(cand))
    return int(probes.rows[idx]) if cand[idx] >= 0.0 else -1


def step(model: AcaModel, probes: ProbeSet, oracle: EntryOracle):
    """Perform one cross-approximation step, mutating model and probes.

    Pivot row: the start row on the first step, afterwards the index of the
    largest magnitude in the previous column vector. That walk can crawl on
    banded kernels, reducing little of the remaining mass; when the probe
    sum of squares stagnates over ``STALL_WINDOW`` steps, row selection
    switches to the unused row holding the largest probe residual for the
    remainder of the run. Pivot column: largest magnitude in the fresh
    residual row. Evaluates exactly one row and one column of A.
    """
    k = model.k
    if k >= min(model.nrows, model.ncols):
        raise RankExhausted("no unused row/column pair remains")

    if k == 0:
        i_star = model.start_row
        pivot_ref = float(np.max(np.abs(probes.values))) if probes.t else 0.0
    else:
        i_star = -1
        if model._probe_mode:
            i_star = _max_probe_row(model, probes)
        if i_star < 0:
            i_star = core.argmax_abs_masked(model._wc[k - 1], model._used_rows)
        if i_star < 0:
            i_star = _max_probe_row(model, probes)
        if i_star < 0:
            raise RankExhausted("all rows used")
        pivot_ref = model._first_pivot

    retries = 0
    while True:
        coeff = np.ascontiguousarray(model._wc[:k, i_star])
        wr = core.residual_vector(oracle.row(i_star), model.wr_stack, coeff)
        j_star = core.argmax_abs_masked(wr, model._used_cols)
        if j_star < 0:
            raise RankExhausted("all columns used")
        pivot = wr[j_star]
        if abs(pivot) > PIVOT_RTOL * pivot_ref and pivot != 0.0:
            break
        # Residual row is numerically dead; retire it and retry from the
        # probe position with the largest outstanding residual.
        model._used_rows[i_star] = 1
        retries += 1
        if retries > MAX_PIVOT_RETRIES:
            raise RankExhausted(
                f"pivot magnitude below {PIVOT_RTOL:g} of the first pivot "
                f"after {MAX_PIVOT_RETRIES} retries"
            )
        i_star = _max_probe_row(model, probes)
        if i_star < 0:
            raise RankExhausted("no unused row with a live probe residual")

    coeff_col = np.ascontiguousarray(model._wr[:k, j_star])
    wc = core.residual_vector(oracle.col(j_star), model.wc_stack, coeff_col)
    wc /= pivot

    model._append(i_star, j_star, wc, wr, pivot)
    core.update_probe_values(probes.values, probes.rows, probes.cols, wc, wr)
    ss = float(probes.values @ probes.values)
    model._ss_history.append(ss)
    if not model._probe_mode and len(model._ss_history) > STALL_WINDOW:
        past = model._ss_history[-1 - STALL_WINDOW]
        if past > 0.0 and ss > STALL_DECAY * past:
            model._probe_mode = True
    return model, probes


def estimate_error(probes: ProbeSet, dims, mode: str = "consistent") -> ErrorEstimate:
    """Frobenius-norm estimate S_k from the probe residuals.

    ``consistent`` (default) is the unbiased sampling estimator
    ``sqrt((m*n/t) * sum |R|^2)``, exact when the probes cover every entry.
    ``paper-literal`` applies the factor ``m*n/t`` outside the square root
    instead; the two differ by exactly ``sqrt(m*n/t)``.
    """
    m, n = dims
    t = probes.t
    ss = float(probes.values @ probes.values)
    if mode == "consistent":
        s_k = float(np.sqrt(ss * (m * n) / t))
    elif mode == "paper-literal":
        s_k = float(np.sqrt(ss) * (m * n) / t)
    else:
        raise ValueError(f"unknown scaling mode {mode!r}")
    return ErrorEstimate(s_k=s_k, mode=mode)


def materialize(model: AcaModel, rows, cols) -> np.ndarray:
    """Entries of M_k at the given positions (zeros for the empty model)."""
    rows = np.asarray(rows, dtype=np.intp)
    cols = np.asarray(cols, dtype=np.intp)
    return core.eval_cross_sum(model.wc_stack, model.wr_stack, rows, cols)
