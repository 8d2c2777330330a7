# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled lattice kernels. Mirrors ``_kernels_py`` exactly; selected at
import time by ``_backend``."""

from libc.math cimport exp, log1p

import numpy as np


cdef double NEG_INF = float("-inf")


cdef inline double _log_add(double a, double b) nogil:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def forward_fill(const double[:, ::1] y, const double[:, ::1] blank, double[:, ::1] alpha):
    cdef Py_ssize_t T = blank.shape[0]
    cdef Py_ssize_t U1 = blank.shape[1]
    cdef Py_ssize_t U = U1 - 1
    cdef Py_ssize_t t, u
    with nogil:
        alpha[0, 0] = 0.0
        for u in range(1, U1):
            alpha[0, u] = alpha[0, u - 1] + y[0, u - 1]
        for t in range(1, T):
            alpha[t, 0] = alpha[t - 1, 0] + blank[t - 1, 0]
            for u in range(1, U1):
                alpha[t, u] = _log_add(
                    alpha[t, u - 1] + y[t, u - 1],
                    alpha[t - 1, u] + blank[t - 1, u],
                )
    return alpha[T - 1, U] + blank[T - 1, U]


def backward_fill(const double[:, ::1] y, const double[:, ::1] blank, double[:, ::1] beta):
    cdef Py_ssize_t T = blank.shape[0]
    cdef Py_ssize_t U1 = blank.shape[1]
    cdef Py_ssize_t U = U1 - 1
    cdef Py_ssize_t t, u
    with nogil:
        beta[T - 1, U] = blank[T - 1, U]
        for u in range(U - 1, -1, -1):
            beta[T - 1, u] = y[T - 1, u] + beta[T - 1, u + 1]
        for t in range(T - 2, -1, -1):
            beta[t, U] = blank[t, U] + beta[t + 1, U]
            for u in range(U - 1, -1, -1):
                beta[t, u] = _log_add(
                    y[t, u] + beta[t, u + 1],
                    blank[t, u] + beta[t + 1, u],
                )


def occupation_fill(
    const double[:, ::1] y,
    const double[:, ::1] blank,
    const double[:, ::1] alpha,
    const double[:, ::1] beta,
    double total,
    double[:, ::1] occ_y,
    double[:, ::1] occ_blank,
):
    cdef Py_ssize_t T = blank.shape[0]
    cdef Py_ssize_t U1 = blank.shape[1]
    cdef Py_ssize_t U = U1 - 1
    cdef Py_ssize_t t, u
    with nogil:
        for t in range(T):
            for u in range(U):
                occ_y[t, u] = exp(alpha[t, u] + y[t, u] + beta[t, u + 1] - total)
        for t in range(T - 1):
            for u in range(U1):
                occ_blank[t, u] = exp(
                    alpha[t, u] + blank[t, u] + beta[t + 1, u] - total
                )
        for u in range(U):
            occ_blank[T - 1, u] = 0.0
        occ_blank[T - 1, U] = 1.0


def viterbi_fill(const double[:, ::1] y, const double[:, ::1] blank, long long[::1] pi):
    cdef Py_ssize_t T = blank.shape[0]
    cdef Py_ssize_t U1 = blank.shape[1]
    cdef Py_ssize_t U = U1 - 1
    cdef Py_ssize_t t, u
    cdef double via_token, via_blank
    best_arr = np.empty((T, U1), dtype=np.float64)
    cdef double[:, ::1] best = best_arr
    with nogil:
        best[T - 1, U] = blank[T - 1, U]
        for u in range(U - 1, -1, -1):
            best[T - 1, u] = y[T - 1, u] + best[T - 1, u + 1]
        for t in range(T - 2, -1, -1):
            best[t, U] = blank[t, U] + best[t + 1, U]
            for u in range(U - 1, -1, -1):
                via_token = y[t, u] + best[t, u + 1]
                via_blank = blank[t, u] + best[t + 1, u]
                best[t, u] = via_token if via_token >= via_blank else via_blank
        t = 0
        u = 0
        while u < U:
            if y[t, u] + best[t, u + 1] == best[t, u]:
                pi[u] = t
                u += 1
            else:
                t += 1
    return best[0, 0]
