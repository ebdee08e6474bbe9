# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False, cdivision=True
"""Compiled per-step inner loops; semantics match ``crossreg.core_py``."""

from libc.math cimport fabs

import numpy as np

BACKEND = "cython"


def residual_vector(double[::1] raw, double[:, ::1] w_stack, double[::1] coeff, out=None):
    cdef Py_ssize_t k = w_stack.shape[0]
    cdef Py_ssize_t n = raw.shape[0]
    if out is None:
        out = np.empty(n)
    cdef double[::1] o = out
    cdef Py_ssize_t l, j
    cdef double c
    for j in range(n):
        o[j] = raw[j]
    for l in range(k):
        c = coeff[l]
        for j in range(n):
            o[j] -= c * w_stack[l, j]
    return out


def argmax_abs_masked(double[::1] v, unsigned char[::1] excluded):
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t j, best = -1
    cdef double a, best_val = -1.0
    for j in range(n):
        if excluded[j]:
            continue
        a = fabs(v[j])
        if a > best_val:
            best_val = a
            best = j
    return best


def update_probe_values(double[::1] values, Py_ssize_t[::1] rows, Py_ssize_t[::1] cols,
                        double[::1] wc, double[::1] wr):
    cdef Py_ssize_t t = values.shape[0]
    cdef Py_ssize_t l
    for l in range(t):
        values[l] -= wc[rows[l]] * wr[cols[l]]


def eval_cross_sum(double[:, ::1] wc_stack, double[:, ::1] wr_stack,
                   Py_ssize_t[::1] rows, Py_ssize_t[::1] cols, out=None):
    cdef Py_ssize_t k = wc_stack.shape[0]
    cdef Py_ssize_t t = rows.shape[0]
    if out is None:
        out = np.zeros(t)
    cdef double[::1] o = out
    cdef Py_ssize_t l, m
    cdef double acc
    for l in range(t):
        acc = 0.0
        for m in range(k):
            acc += wc_stack[m, rows[l]] * wr_stack[m, cols[l]]
        o[l] = acc
    return out
