"""MAP estimation of kernel hyperparameters and per-level noise variances.

The objective is the log of the joint posterior density, up to a constant:

    log p(Z | theta)  (constant mean integrated out under a flat prior)
  + log p(ln lambda)  (exchangeable log-normal prior over the levels)

with flat priors on the remaining log-parameters inside a box.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg, optimize

from ._core import impl
from .designs import lhs
from .exceptions import IllConditionedError, UnfittableModelError
from .gp import (Dataset, FittedModel, NoiseModel, assemble_gram, build_model,
                 cholesky_with_jitter, fit_gls_mean, match_levels)
from .kernels import (KernelSpec, MaternParams, TemporalCorrParams, Variant,
                      brownian_power)

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
DEFAULT_SHARED_VARIANCE = math.log(10.0) ** 2
DEFAULT_WITHIN_VARIANCE = (math.log(2.0) / 3.0) ** 2
DEFAULT_LAMBDA_FRACTION = 0.01


# -- prior on the noise variances -------------------------------------------

@dataclass(frozen=True)
class LambdaPrior:
    """Normal prior on ``(ln lambda(t))_t``: mean ``log_center * 1``,
    covariance ``within_variance * I + shared_variance * ones``."""

    log_center: float
    levels: tuple
    within_variance: float = DEFAULT_WITHIN_VARIANCE
    shared_variance: float = DEFAULT_SHARED_VARIANCE

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(float(t) for t in self.levels))
        if not (self.within_variance > 0 and self.shared_variance > 0):
            raise ValueError("prior variances must be positive")
        if not math.isfinite(self.log_center):
            raise ValueError("prior log-center must be finite")

    @classmethod
    def from_outputs(cls, Z, levels, fraction: float = DEFAULT_LAMBDA_FRACTION,
                     within_variance: float = DEFAULT_WITHIN_VARIANCE,
                     shared_variance: float = DEFAULT_SHARED_VARIANCE) -> "LambdaPrior":
        """Center the prior so that ``sqrt(lambda_prior) = fraction * range(Z)``."""
        spread = float(np.max(Z) - np.min(Z))
        if not spread > 0:
            raise UnfittableModelError("outputs have zero range; cannot set the noise prior")
        return cls(2.0 * math.log(fraction * spread), tuple(levels),
                   within_variance, shared_variance)

    @property
    def p(self) -> int:
        return len(self.levels)

    def covariance(self) -> np.ndarray:
        p = self.p
        return self.within_variance * np.eye(p) + self.shared_variance * np.ones((p, p))

    def precision(self) -> np.ndarray:
        """Closed-form inverse of :meth:`covariance`."""
        p, w, s = self.p, self.within_variance, self.shared_variance
        return (np.eye(p) - (s / (w + p * s)) * np.ones((p, p))) / w

    def log_det(self) -> float:
        p, w, s = self.p, self.within_variance, self.shared_variance
        return (p - 1) * math.log(w) + math.log(w + p * s)

    def conditional_mode(self, observed_log_lambdas) -> float:
        """Mode of ``ln lambda`` at an unobserved level given the observed ones."""
        y = np.asarray(observed_log_lambdas, dtype=float)
        if y.size == 0:
            return self.log_center
        w, s = self.within_variance, self.shared_variance
        return self.log_center + s / (w + y.size * s) * float(np.sum(y - self.log_center))


def lambda_log_prior(log_lambdas, prior: LambdaPrior) -> float:
    """Log-density of the exchangeable normal prior at ``log_lambdas``."""
    y = np.atleast_1d(np.asarray(log_lambdas, dtype=float))
    if y.shape != (prior.p,):
        raise ValueError(f"expected {prior.p} log-variances, got {y.size}")
    w, s, p = prior.within_variance, prior.shared_variance, prior.p
    delta = y - prior.log_center
    total = float(np.sum(delta))
    quad = (float(delta @ delta) - s / (w + p * s) * total * total) / w
    return -0.5 * (p * LOG_2PI + prior.log_det() + quad)


def _lambda_log_prior_grad(log_lambdas, prior: LambdaPrior) -> np.ndarray:
    w, s, p = prior.within_variance, prior.shared_variance, prior.p
    delta = np.asarray(log_lambdas, dtype=float) - prior.log_center
    return -(delta - s / (w + p * s) * np.sum(delta)) / w


# -- parameter packing ---------------------------------------------------------

@dataclass(frozen=True)
class ParameterLayout:
    """Maps a flat log-scale vector to a :class:`KernelSpec` and noise levels."""

    variant: Variant
    d: int
    levels: tuple
    nu: float
    t_scale: float
    names: tuple
    lower: np.ndarray = field(repr=False)
    upper: np.ndarray = field(repr=False)

    @classmethod
    def for_dataset(cls, ds: Dataset, variant, prior: LambdaPrior,
                    nu: float = 2.5) -> "ParameterLayout":
        variant = Variant.parse(variant)
        d = ds.d
        xr = np.ptp(ds.X, axis=0)
        xr = np.where(xr > 0, xr, 1.0)
        varz = float(np.var(ds.Z))
        if not varz > 0:
            raise UnfittableModelError("outputs have zero variance; the model cannot be fitted")
        log_var = (math.log(1e-6 * varz), math.log(100.0 * varz))
        log_rho = [(math.log(0.01 * r), math.log(10.0 * r)) for r in xr]
        half = 3.0 * math.sqrt(prior.shared_variance)
        log_lam = (prior.log_center - half, prior.log_center + half)
        names, bounds = [], []

        def add(name, b):
            names.append(name)
            bounds.append(b)

        rho_names = [f"x{j + 1}" for j in range(d)]
        if variant is Variant.TWO_SCALE:
            add("log_variance_xi0", log_var)
            for j, b in enumerate(log_rho):
                add(f"log_lengthscale_xi0[{rho_names[j]}]", b)
            add("log_variance_eps", log_var)
            for j, b in enumerate(log_rho):
                add(f"log_lengthscale_eps[{rho_names[j]}]", b)
            add("log_exponent_L", (math.log(0.1), math.log(4.0)))
        elif variant is Variant.STATIONARY:
            tr = float(np.ptp(ds.T)) or 1.0
            add("log_variance", log_var)
            for j, b in enumerate(log_rho):
                add(f"log_lengthscale[{rho_names[j]}]", b)
            add("log_lengthscale[t]", (math.log(0.01 * tr), math.log(10.0 * tr)))
        else:
            if ds.levels.size != 1:
                raise ValueError("the single-level model needs data at exactly one fidelity level")
            add("log_variance", log_var)
            for j, b in enumerate(log_rho):
                add(f"log_lengthscale[{rho_names[j]}]", b)
        for t in ds.levels:
            add(f"log_noise[{t:.6g}]", log_lam)
        lower = np.array([b[0] for b in bounds])
        upper = np.array([b[1] for b in bounds])
        return cls(variant, d, tuple(float(t) for t in ds.levels), float(nu),
                   float(np.max(ds.T)), tuple(names), lower, upper)

    @property
    def size(self) -> int:
        return len(self.names)

    @property
    def n_noise(self) -> int:
        return len(self.levels)

    def unpack(self, theta):
        """Return ``(KernelSpec, log_lambdas)``."""
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.size,):
            raise ValueError(f"expected {self.size} parameters, got {theta.shape}")
        d, nu = self.d, self.nu
        e = np.exp(theta)
        if self.variant is Variant.TWO_SCALE:
            spec = KernelSpec.two_scale(
                MaternParams(e[0], e[1:1 + d], nu),
                MaternParams(e[1 + d], e[2 + d:2 + 2 * d], nu),
                TemporalCorrParams(e[2 + 2 * d], self.t_scale))
        elif self.variant is Variant.STATIONARY:
            spec = KernelSpec.stationary(MaternParams(e[0], e[1:2 + d], nu))
        else:
            spec = KernelSpec.single_level(MaternParams(e[0], e[1:1 + d], nu))
        return spec, theta[self.size - self.n_noise:].copy()

    def pack(self, spec: KernelSpec, log_lambdas) -> np.ndarray:
        if spec.variant is not self.variant:
            raise ValueError("kernel variant does not match the layout")
        if spec.variant is Variant.TWO_SCALE:
            a, b = spec.params_xi0, spec.params_eps
            parts = [[a.variance], a.lengthscales, [b.variance], b.lengthscales,
                     [spec.temporal.exponent]]
        elif spec.variant is Variant.STATIONARY:
            parts = [[spec.params_joint.variance], spec.params_joint.lengthscales]
        else:
            parts = [[spec.params_x.variance], spec.params_x.lengthscales]
        kern = np.log(np.concatenate([np.asarray(p, dtype=float) for p in parts]))
        return np.concatenate([kern, np.asarray(log_lambdas, dtype=float)])

    def noise_model(self, log_lambdas) -> NoiseModel:
        return NoiseModel(np.array(self.levels), log_lambdas)

    def clip(self, theta) -> np.ndarray:
        return np.clip(theta, self.lower, self.upper)


# -- objective -------------------------------------------------------------------

def profile_log_likelihood(ds: Dataset, spec: KernelSpec, noise: NoiseModel) -> float:
    """``log int N(Z; m 1, K) dm`` under a flat prior on ``m``."""
    factor = assemble_gram(ds, spec, noise)
    m_hat, denom = fit_gls_mean(ds, factor)
    r = factor.half_solve(ds.Z - m_hat)
    return -0.5 * ((ds.n - 1) * LOG_2PI + factor.log_det + math.log(denom) + float(r @ r))


def _weighted_sqdist(B, Xc, inv_rho):
    # sum_ab B_ab (x_aj - x_bj)^2 * inv_rho_j^2 / 2, for symmetric B and each j
    rowsum = B.sum(axis=1)
    return inv_rho**2 * ((Xc**2).T @ rowsum - np.einsum("ij,ij->j", Xc, B @ Xc))


def _objective_parts(theta, ds: Dataset, layout: ParameterLayout, want_grad: bool):
    """Profile log-likelihood and (optionally) its gradient in ``theta``."""
    spec, log_lam = layout.unpack(theta)
    d = layout.d
    lam = np.exp(log_lam)[ds.level_index]
    X = np.ascontiguousarray(ds.X)
    pieces = {}
    if layout.variant is Variant.TWO_SCALE:
        p0, pe = spec.params_xi0, spec.params_eps
        K0, G0 = impl.matern_sym_grad(X, p0.inv_rho, p0.variance, p0.nu_code)
        Ke, Ge = impl.matern_sym_grad(X, pe.inv_rho, pe.variance, pe.nu_code)
        R = brownian_power(ds.T, ds.T, spec.temporal)
        RKe = R * Ke
        K = K0 + RKe
        pieces = dict(K0=K0, G0=G0, RKe=RKe, RGe=R * Ge, R=R, p0=p0, pe=pe)
    else:
        p = spec.params_joint if layout.variant is Variant.STATIONARY else spec.params_x
        Y = X if layout.variant is Variant.SINGLE_LEVEL else np.ascontiguousarray(
            np.column_stack([X, ds.T]))
        K, G = impl.matern_sym_grad(Y, p.inv_rho, p.variance, p.nu_code)
        pieces = dict(K1=K.copy(), G1=G, Y=Y, p=p)
    K[np.diag_indices_from(K)] += lam
    L, jitter = cholesky_with_jitter(K, "Gram")
    ones = np.ones(ds.n)
    kinv_one = linalg.cho_solve((L, True), ones, check_finite=False)
    denom = float(np.sum(kinv_one))
    m_hat = float(kinv_one @ ds.Z) / denom
    alpha = linalg.cho_solve((L, True), ds.Z - m_hat, check_finite=False)
    log_det = 2.0 * float(np.sum(np.log(np.diag(L))))
    value = -0.5 * ((ds.n - 1) * LOG_2PI + log_det + math.log(denom)
                    + float((ds.Z - m_hat) @ alpha))
    if not want_grad:
        return value, None
    Kinv = linalg.cho_solve((L, True), np.eye(ds.n), check_finite=False)
    W = np.outer(alpha, alpha) - Kinv + np.outer(kinv_one, kinv_one) / denom
    grad = np.empty(layout.size)
    if layout.variant is Variant.TWO_SCALE:
        Xc = X - X.mean(axis=0)
        p0, pe = pieces["p0"], pieces["pe"]
        grad[0] = 0.5 * np.sum(W * pieces["K0"])
        grad[1:1 + d] = _weighted_sqdist(W * pieces["G0"], Xc, p0.inv_rho)
        WRKe = W * pieces["RKe"]
        grad[1 + d] = 0.5 * np.sum(WRKe)
        grad[2 + d:2 + 2 * d] = _weighted_sqdist(W * pieces["RGe"], Xc, pe.inv_rho)
        logR = spec.temporal.exponent * np.log(
            np.minimum.outer(ds.T, ds.T) / spec.temporal.t_scale)
        grad[2 + 2 * d] = 0.5 * np.sum(WRKe * logR)
        k = 3 + 2 * d
    else:
        Y = pieces["Y"]
        Yc = Y - Y.mean(axis=0)
        p = pieces["p"]
        grad[0] = 0.5 * np.sum(W * pieces["K1"])
        nr = p.dim
        grad[1:1 + nr] = _weighted_sqdist(W * pieces["G1"], Yc, p.inv_rho)
        k = 1 + nr
    wdiag = np.diag(W) * lam
    grad[k:] = 0.5 * np.bincount(ds.level_index, weights=wdiag, minlength=layout.n_noise)
    return value, grad


def map_objective(theta, ds: Dataset, layout: ParameterLayout, prior: LambdaPrior,
                  prior_weight: float = 1.0, return_grad: bool = False):
    """Log joint posterior density (up to a constant) at ``theta``.

    Returns ``-inf`` (and a zero gradient) where the Gram matrix cannot be
    factorized.
    """
    theta = np.asarray(theta, dtype=float)
    log_lam = theta[layout.size - layout.n_noise:]
    try:
        value, grad = _objective_parts(theta, ds, layout, return_grad)
    except IllConditionedError:
        return (-np.inf, np.zeros(layout.size)) if return_grad else -np.inf
    if prior_weight:
        value += prior_weight * lambda_log_prior(log_lam, prior)
        if return_grad:
            grad[layout.size - layout.n_noise:] += (
                prior_weight * _lambda_log_prior_grad(log_lam, prior))
    return (value, grad) if return_grad else value


# -- optimization ------------------------------------------------------------------

@dataclass
class FitConfig:
    """Settings for :func:`map_fit`."""

    nu: float = 2.5
    n_starts: int = 10
    max_iter: int = 300
    seed: int = 0
    method: str = "L-BFGS-B"
    lambda_fraction: float = DEFAULT_LAMBDA_FRACTION
    within_variance: float = DEFAULT_WITHIN_VARIANCE
    shared_variance: float = DEFAULT_SHARED_VARIANCE
    prediction_levels: Sequence[float] = ()
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if self.method.lower() not in {"l-bfgs-b", "powell", "nelder-mead"}:
            raise ValueError(f"unsupported optimizer {self.method!r}")


@dataclass
class StartReport:
    index: int
    initial_objective: float
    final_objective: float
    iterations: int
    evaluations: int
    converged: bool
    message: str


@dataclass
class OptimizationReport:
    method: str
    best_start: int
    objective: float
    starts: List[StartReport]

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MAPResult:
    model: FittedModel
    theta: np.ndarray
    layout: ParameterLayout
    prior: LambdaPrior
    report: OptimizationReport


_PENALTY = 1e300


def _run_start(index, theta0, ds, layout, prior, cfg):
    best = {"f": -np.inf, "theta": np.array(theta0)}
    method = cfg.method.lower()

    def record(theta, f):
        if f > best["f"]:
            best["f"], best["theta"] = f, np.array(theta)

    def fun_grad(theta):
        theta = layout.clip(theta)
        f, g = map_objective(theta, ds, layout, prior, return_grad=True)
        record(theta, f)
        if not np.isfinite(f):
            return _PENALTY, np.zeros_like(theta)
        return -f, -g

    def fun(theta):
        theta = layout.clip(theta)
        f = map_objective(theta, ds, layout, prior)
        record(theta, f)
        return _PENALTY if not np.isfinite(f) else -f

    f0 = map_objective(theta0, ds, layout, prior)
    record(theta0, f0)
    bounds = list(zip(layout.lower, layout.upper))
    if method == "l-bfgs-b":
        res = optimize.minimize(fun_grad, theta0, jac=True, method="L-BFGS-B", bounds=bounds,
                                options={"maxiter": cfg.max_iter})
    elif method == "powell":
        res = optimize.minimize(fun, theta0, method="Powell", bounds=bounds,
                                options={"maxiter": cfg.max_iter, "xtol": 1e-4, "ftol": 1e-8})
    else:
        res = optimize.minimize(fun, theta0, method="Nelder-Mead", bounds=bounds,
                                options={"maxiter": cfg.max_iter * layout.size,
                                         "xatol": 1e-4, "fatol": 1e-8, "adaptive": True})
    report = StartReport(index, float(f0), float(best["f"]), int(getattr(res, "nit", 0)),
                         int(res.nfev), bool(res.success), str(res.message))
    return best["theta"], best["f"], report


def start_points(layout: ParameterLayout, n_starts: int, seed: int) -> np.ndarray:
    """Space-filling start points over the log-scale box."""
    box = np.column_stack([layout.lower, layout.upper])
    return lhs(n_starts, box, seed)


def map_fit(ds: Dataset, variant, config: Optional[FitConfig] = None) -> MAPResult:
    """Multi-start MAP estimation; returns the best fitted model and a report."""
    cfg = config or FitConfig()
    variant = Variant.parse(variant)
    if variant is Variant.SINGLE_LEVEL and ds.levels.size != 1:
        raise ValueError("the single-level model needs data at exactly one fidelity level")
    if not np.ptp(ds.Z) > 0:
        raise UnfittableModelError("outputs are constant; the model cannot be fitted")
    prior = LambdaPrior.from_outputs(ds.Z, ds.levels, cfg.lambda_fraction,
                                     cfg.within_variance, cfg.shared_variance)
    layout = ParameterLayout.for_dataset(ds, variant, prior, cfg.nu)
    starts = start_points(layout, cfg.n_starts, cfg.seed)

    def job(i):
        return _run_start(i, starts[i], ds, layout, prior, cfg)

    if cfg.n_jobs > 1:
        with ThreadPoolExecutor(cfg.n_jobs) as pool:
            results = list(pool.map(job, range(cfg.n_starts)))
    else:
        results = [job(i) for i in range(cfg.n_starts)]

    values = np.array([r[1] for r in results])
    if not np.any(np.isfinite(values)):
        raise UnfittableModelError("every optimization start failed to factorize the Gram matrix")
    best = int(np.argmax(values))  # first index wins ties
    theta = results[best][0]
    spec, log_lam = layout.unpack(theta)
    noise = layout.noise_model(log_lam)
    for t in cfg.prediction_levels:
        if match_levels([t], noise.levels)[0] < 0:
            noise = noise.with_level(float(t), prior.conditional_mode(log_lam))
    model = build_model(ds, spec, noise)
    report = OptimizationReport(cfg.method, best, float(values[best]), [r[2] for r in results])
    logger.info("MAP fit (%s): objective %.6g from start %d", variant.value, values[best], best)
    return MAPResult(model, theta, layout, prior, report)
