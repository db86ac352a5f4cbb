"""Covariance functions for the multi-fidelity model.

Three model variants share this module:

* ``TWO_SCALE``: ``k0(x - x') + (min(t, t') / t_scale)**L * k_eps(x - x')``,
  an ideal-simulator term plus a separable numerical-error term whose
  variance vanishes as the fidelity parameter ``t`` goes to zero.
* ``STATIONARY``: one anisotropic Matérn kernel on the joint ``(x, t)`` space.
* ``SINGLE_LEVEL``: anisotropic Matérn on ``x`` only; ``t`` is ignored.

Matérn smoothness is restricted to 1/2, 3/2 and 5/2 so every evaluation is a
closed form. Block assembly is delegated to :mod:`mfgp._core`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._core import NU_CODES, impl

ALLOWED_NU = (0.5, 1.5, 2.5)


class Variant(str, enum.Enum):
    TWO_SCALE = "two-scale"
    STATIONARY = "stationary"
    SINGLE_LEVEL = "single-level"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"twoscale": "two-scale", "stationary-joint": "stationary",
                   "stationaryjoint": "stationary", "singlelevel": "single-level",
                   "hf": "single-level", "pg": "two-scale", "mf": "stationary"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown model variant {value!r}; "
                             f"expected one of {[v.value for v in cls]}") from None


def _check_nu(nu: float) -> float:
    nu = float(nu)
    for allowed in ALLOWED_NU:
        if abs(nu - allowed) < 1e-12:
            return allowed
    raise ValueError(f"Matérn smoothness must be one of {ALLOWED_NU}, got {nu}")


@dataclass(frozen=True)
class MaternParams:
    """Anisotropic Matérn parameters: variance, one lengthscale per coordinate, smoothness."""

    variance: float
    lengthscales: tuple
    nu: float = 2.5

    def __post_init__(self):
        rho = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", rho)
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "nu", _check_nu(self.nu))
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise ValueError(f"Matérn variance must be positive, got {self.variance}")
        if len(rho) == 0:
            raise ValueError("at least one lengthscale is required")
        if not all(r > 0 and math.isfinite(r) for r in rho):
            raise ValueError(f"lengthscales must be positive, got {rho}")

    @property
    def dim(self) -> int:
        return len(self.lengthscales)

    @property
    def inv_rho(self) -> np.ndarray:
        return 1.0 / np.asarray(self.lengthscales, dtype=float)

    @property
    def nu_code(self) -> int:
        return NU_CODES[self.nu]


@dataclass(frozen=True)
class TemporalCorrParams:
    """Brownian-power correlation in the fidelity parameter."""

    exponent: float
    t_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "exponent", float(self.exponent))
        object.__setattr__(self, "t_scale", float(self.t_scale))
        if not (self.exponent > 0 and math.isfinite(self.exponent)):
            raise ValueError(f"exponent L must be positive, got {self.exponent}")
        if not (self.t_scale > 0 and math.isfinite(self.t_scale)):
            raise ValueError(f"t_scale must be positive, got {self.t_scale}")


@dataclass(frozen=True)
class KernelSpec:
    """A model-variant kernel; only the fields of ``variant`` are populated."""

    variant: Variant
    params_xi0: Optional[MaternParams] = None
    params_eps: Optional[MaternParams] = None
    temporal: Optional[TemporalCorrParams] = None
    params_joint: Optional[MaternParams] = None
    params_x: Optional[MaternParams] = None

    def __post_init__(self):
        variant = Variant.parse(self.variant)
        object.__setattr__(self, "variant", variant)
        required = {
            Variant.TWO_SCALE: ("params_xi0", "params_eps", "temporal"),
            Variant.STATIONARY: ("params_joint",),
            Variant.SINGLE_LEVEL: ("params_x",),
        }[variant]
        names = ("params_xi0", "params_eps", "temporal", "params_joint", "params_x")
        for name in names:
            present = getattr(self, name) is not None
            if present != (name in required):
                state = "missing" if name in required else "not allowed"
                raise ValueError(f"{variant.value} kernel: field {name} is {state}")
        if variant is Variant.TWO_SCALE and self.params_xi0.dim != self.params_eps.dim:
            raise ValueError("params_xi0 and params_eps must have the same dimension")

    @classmethod
    def two_scale(cls, xi0: MaternParams, eps: MaternParams,
                  temporal: TemporalCorrParams) -> "KernelSpec":
        return cls(Variant.TWO_SCALE, params_xi0=xi0, params_eps=eps, temporal=temporal)

    @classmethod
    def stationary(cls, joint: MaternParams) -> "KernelSpec":
        return cls(Variant.STATIONARY, params_joint=joint)

    @classmethod
    def single_level(cls, px: MaternParams) -> "KernelSpec":
        return cls(Variant.SINGLE_LEVEL, params_x=px)

    @property
    def input_dim(self) -> int:
        """Dimension ``d`` of the ``x`` part of a point."""
        if self.variant is Variant.TWO_SCALE:
            return self.params_xi0.dim
        if self.variant is Variant.STATIONARY:
            return self.params_joint.dim - 1
        return self.params_x.dim


# -- scalar evaluations ------------------------------------------------------

def matern_correlation(r: float, nu: float) -> float:
    """Closed-form Matérn correlation at scaled distance ``r``."""
    nu = _check_nu(nu)
    if nu == 0.5:
        return math.exp(-r)
    if nu == 1.5:
        a = math.sqrt(3.0) * r
        return (1.0 + a) * math.exp(-a)
    a = math.sqrt(5.0) * r
    return (1.0 + a + a * a / 3.0) * math.exp(-a)


def matern(h: Sequence[float], p: MaternParams) -> float:
    """Anisotropic Matérn covariance at lag ``h``."""
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.shape != (p.dim,):
        raise ValueError(f"lag has dimension {h.size}, lengthscales have {p.dim}")
    r = float(np.sqrt(np.sum((h * p.inv_rho) ** 2)))
    return p.variance * matern_correlation(r, p.nu)


def temporal_corr(t: float, t2: float, p: TemporalCorrParams) -> float:
    """``(min(t, t2) / t_scale) ** L``."""
    if not (t > 0 and t2 > 0):
        raise ValueError(f"fidelity levels must be positive, got {t} and {t2}")
    return (min(t, t2) / p.t_scale) ** p.exponent


def kernel_eval(a, b, spec: KernelSpec) -> float:
    """Covariance between two points ``a = (x, t)`` and ``b = (x', t')``."""
    xa, ta = np.atleast_1d(np.asarray(a[0], dtype=float)), float(a[1])
    xb, tb = np.atleast_1d(np.asarray(b[0], dtype=float)), float(b[1])
    d = spec.input_dim
    if xa.shape != (d,) or xb.shape != (d,):
        raise ValueError(f"points must have {d} input coordinates")
    h = xa - xb
    if spec.variant is Variant.TWO_SCALE:
        return (matern(h, spec.params_xi0)
                + temporal_corr(ta, tb, spec.temporal) * matern(h, spec.params_eps))
    if spec.variant is Variant.STATIONARY:
        return matern(np.append(h, ta - tb), spec.params_joint)
    return matern(h, spec.params_x)


# -- blocks -------------------------------------------------------------------

def _as_points(X, T, d):
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
    T = np.ascontiguousarray(np.atleast_1d(np.asarray(T, dtype=float)))
    if X.shape[1] != d:
        raise ValueError(f"inputs have {X.shape[1]} columns, kernel expects {d}")
    if T.shape != (X.shape[0],):
        raise ValueError("fidelity vector length does not match number of inputs")
    return X, T


def brownian_power(TA, TB, p: TemporalCorrParams) -> np.ndarray:
    """Block of ``(min(t, t') / t_scale) ** L``."""
    TA = np.asarray(TA, dtype=float)
    TB = np.asarray(TB, dtype=float)
    if np.any(TA <= 0) or np.any(TB <= 0):
        raise ValueError("fidelity levels must be positive")
    return (np.minimum.outer(TA, TB) / p.t_scale) ** p.exponent


def matern_block(XA, XB, p: MaternParams) -> np.ndarray:
    return impl.matern_cross(XA, XB, p.inv_rho, p.variance, p.nu_code)


def kernel_matrix(spec: KernelSpec, XA, TA, XB=None, TB=None) -> np.ndarray:
    """Covariance block between point sets ``(XA, TA)`` and ``(XB, TB)``.

    With ``XB`` omitted the symmetric block of ``(XA, TA)`` with itself is
    returned.
    """
    d = spec.input_dim
    XA, TA = _as_points(XA, TA, d)
    if XB is None:
        XB, TB = XA, TA
    else:
        XB, TB = _as_points(XB, TB, d)
    if spec.variant is Variant.TWO_SCALE:
        K = matern_block(XA, XB, spec.params_xi0)
        K += brownian_power(TA, TB, spec.temporal) * matern_block(XA, XB, spec.params_eps)
        return K
    if spec.variant is Variant.STATIONARY:
        YA = np.ascontiguousarray(np.column_stack([XA, TA]))
        YB = np.ascontiguousarray(np.column_stack([XB, TB]))
        return matern_block(YA, YB, spec.params_joint)
    return matern_block(XA, XB, spec.params_x)


def kernel_diag(spec: KernelSpec, X, T) -> np.ndarray:
    """Prior variances ``k(s, s)`` at each point."""
    X, T = _as_points(X, T, spec.input_dim)
    n = X.shape[0]
    if spec.variant is Variant.TWO_SCALE:
        if np.any(T <= 0):
            raise ValueError("fidelity levels must be positive")
        r = (T / spec.temporal.t_scale) ** spec.temporal.exponent
        return spec.params_xi0.variance + r * spec.params_eps.variance
    if spec.variant is Variant.STATIONARY:
        return np.full(n, spec.params_joint.variance)
    return np.full(n, spec.params_x.variance)
