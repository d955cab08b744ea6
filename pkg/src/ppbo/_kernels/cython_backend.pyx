# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the likelihood hot loops.

Same contracts as ``numpy_backend``; one pass per call, no temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport erfc, exp, sqrt

cnp.import_array()

cdef double _INV_2SQRTPI = 1.0 / (2.0 * sqrt(3.14159265358979323846))


def likelihood_terms(f, winner, loser, weight, sigma):
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const cnp.intp_t[::1] win = np.ascontiguousarray(winner, dtype=np.intp)
    cdef const cnp.intp_t[::1] los = np.ascontiguousarray(loser, dtype=np.intp)
    cdef const double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef double sig = sigma
    cdef Py_ssize_t n = fv.shape[0], t, nt = win.shape[0]
    grad_arr = np.zeros(n, dtype=np.float64)
    cdef double[::1] grad = grad_arr
    cdef double value = 0.0, delta, d1
    for t in range(nt):
        delta = (fv[los[t]] - fv[win[t]]) / sig
        value += w[t] * 0.5 * erfc(-0.5 * delta)
        d1 = w[t] * exp(-0.25 * delta * delta) * _INV_2SQRTPI / sig
        grad[los[t]] += d1
        grad[win[t]] -= d1
    return value, grad_arr


def likelihood_value(f, winner, loser, weight, sigma):
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const cnp.intp_t[::1] win = np.ascontiguousarray(winner, dtype=np.intp)
    cdef const cnp.intp_t[::1] los = np.ascontiguousarray(loser, dtype=np.intp)
    cdef const double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef double sig = sigma
    cdef Py_ssize_t t, nt = win.shape[0]
    cdef double value = 0.0, delta
    for t in range(nt):
        delta = (fv[los[t]] - fv[win[t]]) / sig
        value += w[t] * 0.5 * erfc(-0.5 * delta)
    return value


def likelihood_hessian(f, winner, loser, weight, sigma):
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const cnp.intp_t[::1] win = np.ascontiguousarray(winner, dtype=np.intp)
    cdef const cnp.intp_t[::1] los = np.ascontiguousarray(loser, dtype=np.intp)
    cdef const double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef double sig = sigma
    cdef Py_ssize_t n = fv.shape[0], t, nt = win.shape[0], li, wi
    lam_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] lam = lam_arr
    cdef double delta, h
    for t in range(nt):
        li = los[t]
        wi = win[t]
        delta = (fv[li] - fv[wi]) / sig
        h = w[t] * (-0.5 * delta) * exp(-0.25 * delta * delta) * _INV_2SQRTPI / (sig * sig)
        lam[li, li] += h
        lam[wi, wi] += h
        lam[li, wi] -= h
        lam[wi, li] -= h
    return lam_arr


def scaled_rank_products(mat, winner, loser, weight, f, sigma):
    cdef const double[:, ::1] m = np.ascontiguousarray(mat, dtype=np.float64)
    cdef const double[::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef const cnp.intp_t[::1] win = np.ascontiguousarray(winner, dtype=np.intp)
    cdef const cnp.intp_t[::1] los = np.ascontiguousarray(loser, dtype=np.intp)
    cdef const double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef double sig = sigma
    cdef Py_ssize_t t, j, nt = win.shape[0], ncol = m.shape[1], li, wi
    out_arr = np.zeros((m.shape[0], ncol), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double delta, h, r
    for t in range(nt):
        li = los[t]
        wi = win[t]
        delta = (fv[li] - fv[wi]) / sig
        h = w[t] * (-0.5 * delta) * exp(-0.25 * delta * delta) * _INV_2SQRTPI / (sig * sig)
        for j in range(ncol):
            r = h * (m[li, j] - m[wi, j])
            out[li, j] += r
            out[wi, j] -= r
    return out_arr
