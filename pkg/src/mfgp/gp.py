"""Gaussian-process core with heteroscedastic per-level noise.

The constant trend ``m`` carries an improper flat prior and is integrated
out, which gives the generalized-least-squares (GLS) formulas used
throughout:

    m_hat = 1' K^-1 Z / 1' K^-1 1
    mean(s)  = m_hat + k(s)' K^-1 (Z - m_hat 1)
    var(s)   = k(s, s) - k(s)' K^-1 k(s) + (1 - 1' K^-1 k(s))^2 / 1' K^-1 1

where ``K = K_prior + diag(lambda(t_i))`` is the noisy Gram matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.linalg.lapack import dpstrf

from .exceptions import (DatasetError, IllConditionedError,
                         NumericalConsistencyError, UnknownLevelError)
from .kernels import KernelSpec, kernel_diag, kernel_matrix

logger = logging.getLogger(__name__)

LEVEL_TOL = 1e-6
JITTER_REL = 1e-10
JITTER_ESCALATIONS = 3
NEG_VAR_TOL = 1e-9


def level_key(t: float) -> str:
    """Canonical string key of a fidelity level (rounded to 1e-6)."""
    s = f"{round(float(t), 6):.6f}".rstrip("0").rstrip(".")
    return s if s else "0"


def group_levels(T, tol: float = LEVEL_TOL):
    """Cluster fidelity values within ``tol``.

    Returns ``(levels, index)`` with ``levels`` sorted ascending (each level
    represented by the smallest member of its cluster) and ``index[i]`` the
    level of ``T[i]``.
    """
    T = np.asarray(T, dtype=float)
    order = np.argsort(T, kind="stable")
    index = np.empty(T.shape[0], dtype=np.intp)
    levels = []
    for i in order:
        if not levels or T[i] - levels[-1] > tol:
            levels.append(T[i])
        index[i] = len(levels) - 1
    return np.array(levels, dtype=float), index


def match_levels(T, levels, tol: float = LEVEL_TOL):
    """Index of each ``T`` value in ``levels``; ``-1`` where absent."""
    T = np.atleast_1d(np.asarray(T, dtype=float))
    levels = np.asarray(levels, dtype=float)
    if levels.size == 0:
        return np.full(T.shape, -1, dtype=np.intp)
    diff = np.abs(T[:, None] - levels[None, :])
    idx = np.argmin(diff, axis=1)
    idx[diff[np.arange(T.size), idx] > tol] = -1
    return idx


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Training runs ``(x_i, t_i, z_i)`` with their grouped fidelity levels."""

    X: np.ndarray
    T: np.ndarray
    Z: np.ndarray
    levels: np.ndarray = field(init=False)
    level_index: np.ndarray = field(init=False, repr=False)
    counts: np.ndarray = field(init=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        T = np.asarray(self.T, dtype=float).ravel()
        Z = np.asarray(self.Z, dtype=float).ravel()
        if X.ndim != 2:
            raise DatasetError("inputs must be a 2-d array")
        n = X.shape[0]
        if T.shape[0] != n or Z.shape[0] != n:
            raise DatasetError(f"inconsistent lengths: X has {n} rows, T {T.shape[0]}, Z {Z.shape[0]}")
        if n < 2:
            raise DatasetError(f"a dataset needs at least 2 rows, got {n}")
        bad = ~(np.isfinite(X).all(axis=1) & np.isfinite(T) & np.isfinite(Z))
        if bad.any():
            raise DatasetError(f"non-finite values in rows {np.flatnonzero(bad).tolist()[:10]}")
        if np.any(T <= 0):
            raise DatasetError("fidelity values must be positive")
        levels, index = group_levels(T)
        object.__setattr__(self, "X", _readonly(X))
        object.__setattr__(self, "T", _readonly(T))
        object.__setattr__(self, "Z", _readonly(Z))
        object.__setattr__(self, "levels", _readonly(levels))
        index.setflags(write=False)
        object.__setattr__(self, "level_index", index)
        counts = np.bincount(index, minlength=levels.size)
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def level_counts(self) -> dict:
        return {float(t): int(c) for t, c in zip(self.levels, self.counts)}

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(self.X[rows], self.T[rows], self.Z[rows])

    def with_outputs(self, Z) -> "Dataset":
        return Dataset(self.X, self.T, Z)


@dataclass(frozen=True)
class NoiseModel:
    """Per-level log noise variances ``ln lambda(t)``."""

    levels: np.ndarray
    log_variances: np.ndarray

    def __post_init__(self):
        levels = np.atleast_1d(np.asarray(self.levels, dtype=float))
        logv = np.atleast_1d(np.asarray(self.log_variances, dtype=float))
        if levels.shape != logv.shape:
            raise ValueError("levels and log_variances must have the same length")
        if not np.all(np.isfinite(logv)):
            raise ValueError("log noise variances must be finite")
        order = np.argsort(levels, kind="stable")
        levels, logv = levels[order], logv[order]
        if np.any(np.diff(levels) <= LEVEL_TOL):
            raise ValueError("duplicate noise levels")
        object.__setattr__(self, "levels", _readonly(levels))
        object.__setattr__(self, "log_variances", _readonly(logv))

    @classmethod
    def from_dict(cls, mapping: dict) -> "NoiseModel":
        keys = sorted(mapping, key=float)
        return cls([float(k) for k in keys], [mapping[k] for k in keys])

    @classmethod
    def homoscedastic(cls, levels, variance: float) -> "NoiseModel":
        levels = np.atleast_1d(levels)
        return cls(levels, np.full(levels.shape, np.log(variance)))

    def as_dict(self) -> dict:
        return {level_key(t): float(v) for t, v in zip(self.levels, self.log_variances)}

    def has_level(self, t: float) -> bool:
        return match_levels([t], self.levels)[0] >= 0

    def log_variance(self, t: float) -> float:
        i = match_levels([t], self.levels)[0]
        if i < 0:
            raise UnknownLevelError(f"no noise variance for fidelity level {level_key(t)}")
        return float(self.log_variances[i])

    def variances(self, T) -> np.ndarray:
        """``lambda(t)`` for each entry of ``T``."""
        idx = match_levels(T, self.levels)
        if np.any(idx < 0):
            missing = sorted({level_key(t) for t in np.atleast_1d(T)[idx < 0]})
            raise UnknownLevelError(f"no noise variance for fidelity level(s) {missing}")
        return np.exp(self.log_variances[idx])

    def with_level(self, t: float, log_variance: float) -> "NoiseModel":
        idx = match_levels([t], self.levels)[0]
        levels, logv = list(self.levels), list(self.log_variances)
        if idx >= 0:
            logv[idx] = log_variance
        else:
            levels.append(t)
            logv.append(log_variance)
        return NoiseModel(levels, logv)


@dataclass(frozen=True)
class GramFactor:
    """Lower Cholesky factor of ``K + diag(lambda) + jitter I``."""

    chol: np.ndarray
    jitter: float
    noise_diag: np.ndarray

    @property
    def log_det(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))

    def solve(self, b):
        return linalg.cho_solve((self.chol, True), b, check_finite=False)

    def half_solve(self, b):
        """``L^-1 b``."""
        return linalg.solve_triangular(self.chol, b, lower=True, check_finite=False)

    def matrix(self) -> np.ndarray:
        return self.chol @ self.chol.T


def cholesky_with_jitter(A: np.ndarray, what: str = "covariance"):
    """Cholesky of ``A``; on failure retry with escalating diagonal jitter.

    The jitter starts at ``1e-10 * mean(diag A)`` and grows tenfold at most
    three times. Returns ``(L, jitter)``.
    """
    try:
        return linalg.cholesky(A, lower=True, check_finite=False), 0.0
    except linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(A)))
    if not np.isfinite(scale) or scale <= 0:
        raise IllConditionedError(f"{what} matrix has non-positive mean diagonal {scale}")
    jitter = JITTER_REL * scale
    n = A.shape[0]
    for _ in range(JITTER_ESCALATIONS + 1):
        try:
            L = linalg.cholesky(A + jitter * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError:
            jitter *= 10.0
            continue
        logger.debug("%s factorization needed jitter %.3g", what, jitter)
        return L, jitter
    raise IllConditionedError(
        f"{what} matrix is not positive definite even with jitter {jitter / 10.0:.3g}")


def assemble_gram(ds: Dataset, kernel: KernelSpec, noise: NoiseModel) -> GramFactor:
    """Factorize ``K_n = K + diag(lambda(t_i))`` (plus jitter on failure)."""
    lam = noise.variances(ds.T)
    K = kernel_matrix(kernel, ds.X, ds.T)
    K[np.diag_indices_from(K)] += lam
    try:
        L, jitter = cholesky_with_jitter(K, "Gram")
    except IllConditionedError as exc:
        raise IllConditionedError(
            f"{exc}; kernel={kernel!r}; noise={noise.as_dict()}") from None
    return GramFactor(L, jitter, lam)


def fit_gls_mean(ds: Dataset, factor: GramFactor):
    """GLS estimate of the constant mean; returns ``(m_hat, 1' K^-1 1)``."""
    kinv_one = factor.solve(np.ones(ds.n))
    denom = float(np.sum(kinv_one))
    m_hat = float(kinv_one @ ds.Z) / denom
    if not (np.isfinite(m_hat) and denom > 0):
        raise IllConditionedError(f"GLS mean is not defined (1'K^-1 1 = {denom})")
    return m_hat, denom


@dataclass(frozen=True)
class FittedModel:
    """Conditioned GP: data, hyperparameters and cached linear algebra."""

    dataset: Dataset
    kernel: KernelSpec
    noise: NoiseModel
    factor: GramFactor
    gls_mean: float
    gls_denominator: float
    alpha: np.ndarray = field(repr=False)       # K^-1 (Z - m_hat 1)
    half_one: np.ndarray = field(repr=False)    # L^-1 1

    @property
    def chol(self) -> np.ndarray:
        return self.factor.chol


def build_model(ds: Dataset, kernel: KernelSpec, noise: NoiseModel) -> FittedModel:
    """Condition the GP on ``ds`` under fixed hyperparameters."""
    if kernel.input_dim != ds.d:
        raise ValueError(f"kernel expects {kernel.input_dim} inputs, dataset has {ds.d}")
    factor = assemble_gram(ds, kernel, noise)
    m_hat, denom = fit_gls_mean(ds, factor)
    alpha = factor.solve(ds.Z - m_hat)
    half_one = factor.half_solve(np.ones(ds.n))
    for a in (alpha, half_one):
        a.setflags(write=False)
    return FittedModel(ds, kernel, noise, factor, m_hat, denom, alpha, half_one)


@dataclass(frozen=True)
class PredictionResult:
    mean: np.ndarray
    variance_latent: np.ndarray
    variance_observation: Optional[np.ndarray] = None


def _as_targets(X, T, d):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if d == 1 else X[None, :]
    T = np.broadcast_to(np.asarray(T, dtype=float), (X.shape[0],)).copy()
    return np.ascontiguousarray(X), T


def _clamp_variance(var, scale):
    tol = NEG_VAR_TOL * np.maximum(1.0, scale)
    if np.any(var < -tol):
        worst = float(np.min(var / np.maximum(1.0, scale)))
        raise NumericalConsistencyError(
            f"negative posterior variance beyond tolerance (relative {worst:.3g})")
    return np.maximum(var, 0.0)


def predict(model: FittedModel, X, T, observation_variance: bool = False,
            block_size: int = 8192) -> PredictionResult:
    """Posterior mean and variance of the latent mean at ``(X, T)``.

    ``T`` may be a scalar level. With ``observation_variance`` the noise
    variance of each target level is added to a second variance vector.
    """
    X, T = _as_targets(X, T, model.dataset.d)
    lam = model.noise.variances(T) if observation_variance else None
    m = X.shape[0]
    mean = np.empty(m)
    var = np.empty(m)
    ds = model.dataset
    for lo in range(0, m, block_size):
        hi = min(m, lo + block_size)
        k = kernel_matrix(model.kernel, ds.X, ds.T, X[lo:hi], T[lo:hi])
        w = model.factor.half_solve(k)
        mean[lo:hi] = model.gls_mean + k.T @ model.alpha
        prior = kernel_diag(model.kernel, X[lo:hi], T[lo:hi])
        u = 1.0 - model.half_one @ w
        gls_term = u * u / model.gls_denominator
        v = prior - np.einsum("ij,ij->j", w, w) + gls_term
        var[lo:hi] = _clamp_variance(v, prior + gls_term)
    return PredictionResult(mean, var, None if lam is None else var + lam)


def posterior_covariance(model: FittedModel, X, T):
    """Joint posterior ``(mean, covariance)`` of the latent mean at ``(X, T)``."""
    X, T = _as_targets(X, T, model.dataset.d)
    ds = model.dataset
    k = kernel_matrix(model.kernel, ds.X, ds.T, X, T)
    w = model.factor.half_solve(k)
    mean = model.gls_mean + k.T @ model.alpha
    u = 1.0 - model.half_one @ w
    C = kernel_matrix(model.kernel, X, T)
    C -= w.T @ w
    C += np.outer(u, u) / model.gls_denominator
    return mean, C


@dataclass(frozen=True)
class LOOResult:
    """Leave-one-out posterior at each training point, hyperparameters fixed."""

    mean: np.ndarray
    variance: np.ndarray              # latent
    variance_observation: np.ndarray  # latent + lambda(t_i)
    residual: np.ndarray              # normalized: (Z_i - mean_i) / sqrt(variance_observation_i)


def loo_residuals(model: FittedModel) -> LOOResult:
    """Closed-form leave-one-out predictions for the integrated-mean GP.

    With ``Q = K^-1 - K^-1 1 1' K^-1 / (1' K^-1 1)`` the held-out residual is
    ``(Q Z)_i / Q_ii`` and its predictive variance (noise included) is
    ``1 / Q_ii``.
    """
    ds = model.dataset
    if ds.n < 2:
        raise ValueError("leave-one-out needs at least 2 observations")
    Linv = model.factor.half_solve(np.eye(ds.n))
    diag_kinv = np.einsum("ij,ij->j", Linv, Linv)
    kinv_one = model.factor.solve(np.ones(ds.n))
    q_diag = diag_kinv - kinv_one**2 / model.gls_denominator
    if np.any(q_diag <= 0):
        raise NumericalConsistencyError("non-positive leave-one-out precision")
    resid = model.alpha / q_diag
    var_obs = 1.0 / q_diag
    noise = model.factor.noise_diag + model.factor.jitter
    var_lat = _clamp_variance(var_obs - noise, var_obs)
    return LOOResult(ds.Z - resid, var_lat, var_obs, resid / np.sqrt(var_obs))


def replicate_streams(seed, n_sim: int):
    """Independent per-replicate seed sequences derived from ``seed``."""
    return np.random.SeedSequence(seed).spawn(n_sim)


@dataclass(frozen=True)
class CovarianceRoot:
    """``C ~= P L L' P'`` from a rank-revealing pivoted Cholesky."""

    factor: np.ndarray   # (m, rank), rows already in original order
    rank: int


def psd_root(C: np.ndarray, scale: Optional[float] = None, what="posterior covariance"):
    """Pivoted Cholesky root of a positive semidefinite matrix.

    Pivots with remaining variance below ``1e-10 * scale`` are dropped, so
    exactly-determined directions (e.g. targets at noiseless training
    points) carry no spurious noise.
    """
    m = C.shape[0]
    d = np.diag(C)
    if scale is None:
        scale = float(np.mean(np.abs(d))) if m else 1.0
    scale = max(scale, np.finfo(float).tiny)
    tol = JITTER_REL * scale
    if np.any(d < -NEG_VAR_TOL * max(1.0, scale)):
        raise IllConditionedError(f"{what} has negative diagonal entries")
    if np.max(d) <= tol:
        return CovarianceRoot(np.zeros((m, 0)), 0)
    c, piv, rank, info = dpstrf(C, tol=tol, lower=1)
    if info < 0:
        raise IllConditionedError(f"pivoted Cholesky of {what} failed (info={info})")
    Lr = np.tril(c[:, :rank])
    root = np.empty((m, rank))
    root[piv - 1] = Lr
    # residual check: dropped part must be tiny in every entry
    resid = C - root @ root.T if m <= 2000 else None
    if resid is not None and np.max(np.abs(resid)) > 1e-6 * max(1.0, scale):
        raise IllConditionedError(f"{what} is not positive semidefinite")
    return CovarianceRoot(root, int(rank))


def conditional_simulate(model: FittedModel, X, T, n_sim: int, seed=0,
                         streams: Optional[Sequence] = None) -> np.ndarray:
    """Joint posterior draws of the latent mean; shape ``(n_sim, n_pts)``.

    Replicate ``s`` uses its own random stream (``streams[s]`` or the
    ``s``-th child of ``SeedSequence(seed)``), so results do not depend on
    how replicates are batched.
    """
    if n_sim < 1:
        raise ValueError("n_sim must be at least 1")
    X, T = _as_targets(X, T, model.dataset.d)
    if X.shape[0] < 1:
        raise ValueError("at least one target point is required")
    mean, C = posterior_covariance(model, X, T)
    prior_scale = float(np.mean(kernel_diag(model.kernel, X, T)))
    root = psd_root(C, prior_scale)
    del C
    if streams is None:
        streams = replicate_streams(seed, n_sim)
    elif len(streams) != n_sim:
        raise ValueError("need one stream per replicate")
    normals = np.empty((n_sim, root.rank))
    for s, ss in enumerate(streams):
        normals[s] = np.random.default_rng(ss).standard_normal(root.rank)
    return mean[None, :] + normals @ root.factor.T
