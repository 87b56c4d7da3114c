# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-symbol error kernels (see _pykernels for the reference)."""
from libc.math cimport erfc, exp, sqrt

import numpy as np


cdef inline double _ser(double gamma, double k, double scale) nogil:
    cdef double q = 0.5 * erfc(sqrt(gamma * scale))
    return 4.0 * k * q - 4.0 * k * k * q * q


cdef inline bint _error(double u, double gamma, double k, double scale) nogil:
    # Q(x) <= exp(-x^2 / 2) / 2 bounds the SER by 2k exp(-gamma scale); a draw
    # above the bound is decoded without evaluating erfc.
    if u >= 2.0 * k * exp(-gamma * scale):
        return False
    return u < _ser(gamma, k, scale)


def qam_ser(gamma, int M):
    cdef double[::1] g = np.ascontiguousarray(np.atleast_1d(gamma), dtype=np.float64).ravel()
    out = np.empty(g.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef double k = 1.0 - 1.0 / sqrt(M)
    cdef double scale = 1.5 / (M - 1)
    cdef Py_ssize_t i
    with nogil:
        for i in range(g.shape[0]):
            o[i] = _ser(g[i], k, scale)
    return out.reshape(np.shape(gamma))


def count_errors(gamma, u, int M):
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    if g.shape[0] != uu.shape[0]:
        raise ValueError("gamma and u must have the same length")
    cdef double k = 1.0 - 1.0 / sqrt(M)
    cdef double scale = 1.5 / (M - 1)
    cdef Py_ssize_t i, n = 0
    with nogil:
        for i in range(g.shape[0]):
            if _error(uu[i], g[i], k, scale):
                n += 1
    return n


def count_coop_errors(g_sf, g_sr, g_rf, u, double gamma_th, int M):
    cdef double[::1] a = np.ascontiguousarray(g_sf, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(g_sr, dtype=np.float64)
    cdef double[::1] c = np.ascontiguousarray(g_rf, dtype=np.float64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef Py_ssize_t size = a.shape[0]
    if b.shape[0] != size or c.shape[0] != size or uu.shape[0] != size:
        raise ValueError("all arrays must have the same length")
    cdef double k = 1.0 - 1.0 / sqrt(M)
    cdef double scale = 1.5 / (M - 1)
    cdef double g
    cdef Py_ssize_t i, n = 0
    with nogil:
        for i in range(size):
            g = a[i]
            if b[i] > gamma_th:
                g = g + c[i]
            if _error(uu[i], g, k, scale):
                n += 1
    return n


def first_error(gamma, u, int M):
    cdef double[::1] g = np.ascontiguousarray(gamma, dtype=np.float64)
    cdef double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    if g.shape[0] != uu.shape[0]:
        raise ValueError("gamma and u must have the same length")
    cdef double k = 1.0 - 1.0 / sqrt(M)
    cdef double scale = 1.5 / (M - 1)
    cdef Py_ssize_t i
    cdef Py_ssize_t hit = -1
    with nogil:
        for i in range(g.shape[0]):
            if _error(uu[i], g[i], k, scale):
                hit = i
                break
    return hit
