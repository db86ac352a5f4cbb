"""Posterior distribution of a threshold-exceedance probability.

For a fitted model and a target fidelity ``t*``, the quantity of interest is
``p = P_X(xi(X, t*) > threshold)`` with ``X`` uniform on a box. Its posterior
is sampled by drawing ``n_pts`` inputs once, simulating ``n_sim`` joint
posterior paths of the latent mean on them, and recording the fraction of
inputs above the threshold on each path.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .designs import _check_box, unit_box
from .gp import FittedModel, conditional_simulate

SILVERMAN = 0.9


@dataclass(frozen=True)
class ExceedanceConfig:
    threshold: float = 60.0
    t_star: float = 20.0
    n_sim: int = 1000
    n_pts: int = 5000
    box: Optional[np.ndarray] = field(default=None, repr=False)
    seed: int = 0
    grid_size: int = 512

    def __post_init__(self):
        if self.n_sim < 2 or self.n_pts < 2:
            raise ValueError("n_sim and n_pts must both be at least 2")
        if self.t_star <= 0:
            raise ValueError("t_star must be positive")
        if self.box is not None:
            object.__setattr__(self, "box", _check_box(self.box))

    def input_box(self, d: int) -> np.ndarray:
        box = unit_box(d) if self.box is None else self.box
        if box.shape[0] != d:
            raise ValueError(f"box has {box.shape[0]} rows, model has {d} inputs")
        return box


@dataclass(frozen=True)
class DensityCurve:
    """Density estimate on a uniform grid, or a point mass when the sample is constant."""

    grid: Optional[np.ndarray]
    density: Optional[np.ndarray]
    bandwidth: Optional[float]
    point_mass: Optional[float] = None

    @property
    def is_point_mass(self) -> bool:
        return self.point_mass is not None

    def integral(self) -> float:
        if self.is_point_mass:
            return 1.0
        return float(np.trapezoid(self.density, self.grid))


@dataclass(frozen=True)
class ExceedanceResult:
    p_samples: np.ndarray
    density: DensityCurve
    inputs: np.ndarray = field(repr=False)
    config: ExceedanceConfig = field(repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.p_samples))

    @property
    def interval95(self):
        lo, hi = np.quantile(self.p_samples, [0.025, 0.975])
        return float(lo), float(hi)

    def summary(self) -> dict:
        lo, hi = self.interval95
        return {
            "mean": self.mean,
            "sd": float(np.std(self.p_samples, ddof=1)),
            "median": float(np.median(self.p_samples)),
            "q025": lo,
            "q975": hi,
            "n_sim": int(self.p_samples.size),
            "n_pts": int(self.inputs.shape[0]),
            "threshold": float(self.config.threshold),
            "t_star": float(self.config.t_star),
        }


def silverman_bandwidth(samples) -> float:
    x = np.asarray(samples, dtype=float)
    sd = np.std(x, ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return SILVERMAN * spread * x.size ** (-0.2)


def kde_density(samples, grid_size: int = 512, bandwidth: Optional[float] = None) -> DensityCurve:
    """Gaussian KDE on ``[0, 1]`` with reflection at both ends.

    The grid spans the support of the sample widened by five bandwidths,
    clipped to ``[0, 1]``, so narrow posteriors are still resolved.
    """
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0 or np.any((x < 0) | (x > 1)):
        raise ValueError("samples must be non-empty and lie in [0, 1]")
    if np.all(x == x[0]):
        return DensityCurve(None, None, None, point_mass=float(x[0]))
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    lo = max(0.0, float(x.min()) - 5.0 * h)
    hi = min(1.0, float(x.max()) + 5.0 * h)
    grid = np.linspace(lo, hi, grid_size)
    dens = np.zeros(grid_size)
    for centres in (x, -x, 2.0 - x):
        for chunk in np.array_split(centres, max(1, centres.size // 2048)):
            u = (grid[:, None] - chunk[None, :]) / h
            dens += np.exp(-0.5 * u * u).sum(axis=1)
    dens /= x.size * h * np.sqrt(2.0 * np.pi)
    return DensityCurve(grid, dens, h)


def sample_inputs(cfg: ExceedanceConfig, d: int) -> np.ndarray:
    """The ``n_pts`` uniform inputs used by :func:`exceedance_posterior`."""
    input_seed, _ = np.random.SeedSequence(cfg.seed).spawn(2)
    box = cfg.input_box(d)
    u = np.random.default_rng(input_seed).random((cfg.n_pts, d))
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def simulation_streams(cfg: ExceedanceConfig):
    _, sim_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    return sim_seed.spawn(cfg.n_sim)


def exceedance_fractions(draws: np.ndarray, threshold: float) -> np.ndarray:
    return np.mean(draws > threshold, axis=1)


def exceedance_posterior(model: FittedModel, cfg: ExceedanceConfig,
                         streams: Optional[Sequence] = None) -> ExceedanceResult:
    """Sample the posterior of the exceedance probability at level ``cfg.t_star``."""
    U = sample_inputs(cfg, model.dataset.d)
    if streams is None:
        streams = simulation_streams(cfg)
    draws = conditional_simulate(model, U, cfg.t_star, cfg.n_sim, streams=streams)
    p = exceedance_fractions(draws, cfg.threshold)
    return ExceedanceResult(p, kde_density(p, cfg.grid_size), U, cfg)
