"""Pure numpy fallback for the Matérn block kernels.

Signatures mirror ``_matern_ext``. Inputs are C-contiguous float64 arrays;
``nu_code`` is 0, 1 or 2 for smoothness 1/2, 3/2 or 5/2.
"""
import numpy as np
from scipy.spatial.distance import cdist

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)


def _corr(r, nu_code):
    if nu_code == 0:
        return np.exp(-r)
    if nu_code == 1:
        a = SQRT3 * r
        return (1.0 + a) * np.exp(-a)
    a = SQRT5 * r
    return (1.0 + a + a * a / 3.0) * np.exp(-a)


def _neg_dcorr_over_r(r, nu_code):
    # -M'(r)/r, finite at r = 0 except for nu = 1/2 (set to 0 there)
    if nu_code == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.exp(-r) / r
        g[r == 0.0] = 0.0
        return g
    if nu_code == 1:
        return 3.0 * np.exp(-SQRT3 * r)
    a = SQRT5 * r
    return (5.0 / 3.0) * (1.0 + a) * np.exp(-a)


def scaled_distance(XA, XB, inv_rho):
    return cdist(XA * inv_rho, XB * inv_rho)


def matern_cross(XA, XB, inv_rho, variance, nu_code):
    """Return the ``(n_a, n_b)`` block ``variance * M_nu(r)``."""
    r = scaled_distance(XA, XB, inv_rho)
    return variance * _corr(r, nu_code)


def matern_sym_grad(X, inv_rho, variance, nu_code):
    """Return ``(K, G)`` on ``X`` against itself.

    ``K = variance * M(r)`` and ``G = variance * (-M'(r) / r)``, so that the
    derivative of ``K`` with respect to ``log rho_j`` is ``G * u_j**2`` with
    ``u_j`` the scaled coordinate difference.
    """
    r = scaled_distance(X, X, inv_rho)
    return variance * _corr(r, nu_code), variance * _neg_dcorr_over_r(r, nu_code)
