# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Matérn block kernels.

Each routine fuses the anisotropic scaled distance with the closed-form
half-integer Matérn correlation, so no ``(n_a, n_b, d)`` temporaries are
built. ``nu_code`` is 0, 1 or 2 for smoothness 1/2, 3/2 or 5/2.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef double SQRT3 = sqrt(3.0)
cdef double SQRT5 = sqrt(5.0)


cdef inline double _corr(double r, int nu_code) noexcept nogil:
    cdef double a
    if nu_code == 0:
        return exp(-r)
    elif nu_code == 1:
        a = SQRT3 * r
        return (1.0 + a) * exp(-a)
    a = SQRT5 * r
    return (1.0 + a + a * a / 3.0) * exp(-a)


cdef inline double _neg_dcorr_over_r(double r, int nu_code) noexcept nogil:
    cdef double a
    if nu_code == 0:
        if r == 0.0:
            return 0.0
        return exp(-r) / r
    elif nu_code == 1:
        return 3.0 * exp(-SQRT3 * r)
    a = SQRT5 * r
    return (5.0 / 3.0) * (1.0 + a) * exp(-a)


def scaled_distance(const double[:, ::1] XA, const double[:, ::1] XB,
                    const double[::1] inv_rho):
    cdef Py_ssize_t na = XA.shape[0], nb = XB.shape[0], d = XA.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, u
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] R = out
    with nogil:
        for i in range(na):
            for j in range(nb):
                s = 0.0
                for k in range(d):
                    u = (XA[i, k] - XB[j, k]) * inv_rho[k]
                    s = s + u * u
                R[i, j] = sqrt(s)
    return out


def matern_cross(const double[:, ::1] XA, const double[:, ::1] XB,
                 const double[::1] inv_rho, double variance, int nu_code):
    """Return the ``(n_a, n_b)`` block ``variance * M_nu(r)``."""
    cdef Py_ssize_t na = XA.shape[0], nb = XB.shape[0], d = XA.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, u
    if XB.shape[1] != d or inv_rho.shape[0] != d:
        raise ValueError("dimension mismatch")
    out = np.empty((na, nb), dtype=np.float64)
    cdef double[:, ::1] K = out
    with nogil:
        for i in range(na):
            for j in range(nb):
                s = 0.0
                for k in range(d):
                    u = (XA[i, k] - XB[j, k]) * inv_rho[k]
                    s = s + u * u
                K[i, j] = variance * _corr(sqrt(s), nu_code)
    return out


def matern_sym_grad(const double[:, ::1] X, const double[::1] inv_rho,
                    double variance, int nu_code):
    """Return ``(K, G)`` with ``G = variance * (-M'(r) / r)``; both symmetric."""
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double s, u, r
    if inv_rho.shape[0] != d:
        raise ValueError("dimension mismatch")
    out_k = np.empty((n, n), dtype=np.float64)
    out_g = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] K = out_k
    cdef double[:, ::1] G = out_g
    with nogil:
        for i in range(n):
            K[i, i] = variance
            G[i, i] = variance * _neg_dcorr_over_r(0.0, nu_code)
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    u = (X[i, k] - X[j, k]) * inv_rho[k]
                    s = s + u * u
                r = sqrt(s)
                K[i, j] = variance * _corr(r, nu_code)
                K[j, i] = K[i, j]
                G[i, j] = variance * _neg_dcorr_over_r(r, nu_code)
                G[j, i] = G[i, j]
    return out_k, out_g
