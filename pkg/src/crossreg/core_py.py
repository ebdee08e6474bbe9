"""NumPy implementation of the per-step inner loops.

``crossreg.core`` selects this module when the compiled extension is not
available (or when ``CROSSREG_BACKEND=python`` is set). The compiled
version in ``core_cy.pyx`` has identical semantics; results may differ in
the last few ulps because the summation order differs.
"""

import numpy as np

BACKEND = "python"


def residual_vector(raw, w_stack, coeff, out=None):
    """Subtract the accumulated skeleton contributions from one row/column.

    Computes ``out[j] = raw[j] - sum_l coeff[l] * w_stack[l, j]`` where
    ``w_stack`` is the (k, n) stack of previous skeleton vectors and
    ``coeff`` holds the k matching coefficients.
    """
    if out is None:
        out = np.array(raw, dtype=np.float64)
    else:
        out[:] = raw
    if w_stack.shape[0]:
        out -= coeff @ w_stack
    return out


def argmax_abs_masked(v, excluded):
    """Index of the largest ``|v[j]|`` with ``excluded[j] == 0``, or -1.

    Ties resolve to the smallest index, matching the compiled backend.
    """
    a = np.abs(v)
    a[excluded != 0] = -1.0
    j = int(np.argmax(a))
    return j if a[j] >= 0.0 else -1


def update_probe_values(values, rows, cols, wc, wr):
    """In-place rank-one residual update ``values[l] -= wc[rows[l]] * wr[cols[l]]``."""
    values -= wc[rows] * wr[cols]


def eval_cross_sum(wc_stack, wr_stack, rows, cols, out=None):
    """Evaluate the skeleton product at scattered positions.

    ``out[l] = sum_k wc_stack[k, rows[l]] * wr_stack[k, cols[l]]``; an empty
    stack yields zeros.
    """
    if out is None:
        out = np.zeros(len(rows))
    else:
        out[:] = 0.0
    if wc_stack.shape[0]:
        np.einsum("ki,ki->i", wc_stack[:, rows], wr_stack[:, cols], out=out)
    return out
