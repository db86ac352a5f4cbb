"""Synthetic stochastic multi-fidelity simulator with known ground truth.

Stands in for an expensive mesh-based code. An output at input
``x in [0, 1]^d`` and mesh size ``t`` is

    z = ideal(x) + amplitude * (t / t_max)**(L/2) * g(x) + N(0, lambda(t))

so the numerical error vanishes as ``t -> 0`` and its variance scales as
``(t / t_max)**L``. The ideal response is a sum of smooth ridge terms
scaled to a temperature-like range (roughly 20 to 80) so that a threshold
of 60 is exceeded on a small but non-negligible fraction of the box.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .designs import Design

DEFAULT_DIM = 8
DEFAULT_LEVELS = (100.0, 50.0, 100.0 / 3.0, 25.0, 20.0)


def _ridge(x: np.ndarray) -> np.ndarray:
    # in [0.09, 0.96] on the unit cube
    return (0.35 * x[0] + 0.15 * np.sin(np.pi * x[1]) + 0.15 * x[2] ** 2
            + 0.10 * (1.0 - x[3]) + 0.10 * x[4] * x[5]
            + 0.08 * np.exp(-4.0 * (x[6] - 0.5) ** 2) + 0.07 * np.sqrt(x[7] + 0.1))


def _oscillation(x: np.ndarray) -> np.ndarray:
    # in [-1.5, 1.5]
    return (np.sin(2.0 * np.pi * x[0] + np.pi * x[2]) * np.cos(np.pi * x[1])
            + 0.5 * np.sin(3.0 * x[3] + 2.0 * x[4]))


def default_noise_sd(t):
    """Coarser meshes are noisier: sd = 0.5 + 0.01 t."""
    return 0.5 + 0.01 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class SyntheticTruth:
    """Closed-form ground truth for the synthetic simulator.

    Only the first eight coordinates enter the response; ``d`` may be
    larger (extra inputs are inert) but not smaller than eight.
    """

    d: int = DEFAULT_DIM
    offset: float = 18.0
    scale: float = 60.0
    amplitude: float = 8.0
    exponent: float = 1.6
    t_max: float = 100.0
    noise_sd: Optional[Callable] = default_noise_sd
    noiseless: bool = False

    def __post_init__(self):
        if self.d < 8:
            raise ValueError("the synthetic simulator needs d >= 8 inputs")

    def _check(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.d:
            raise ValueError(f"expected {self.d} input coordinates, got {X.shape[1]}")
        if np.any(X < 0.0) or np.any(X > 1.0) or not np.all(np.isfinite(X)):
            raise ValueError("inputs must lie in the unit box")
        return X

    def ideal(self, X) -> np.ndarray:
        """Response of the error-free simulator (``t -> 0``)."""
        X = self._check(X)
        return self.offset + self.scale * _ridge(X.T)

    def error_shape(self, X) -> np.ndarray:
        """The ``t``-independent factor ``amplitude * g(x)`` of the numerical error."""
        X = self._check(X)
        return self.amplitude * _oscillation(X.T)

    def error_decay(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("fidelity levels must be positive")
        return (t / self.t_max) ** (self.exponent / 2.0)

    def mean(self, X, t) -> np.ndarray:
        """Latent mean ``xi(x, t)``."""
        return self.ideal(X) + self.error_decay(t) * self.error_shape(X)

    def noise(self, t) -> np.ndarray:
        """Observation variance ``lambda(t)``."""
        t = np.asarray(t, dtype=float)
        if self.noiseless or self.noise_sd is None:
            return np.zeros_like(t)
        return np.asarray(self.noise_sd(t), dtype=float) ** 2


def truth_mean(X, t, truth: Optional[SyntheticTruth] = None) -> np.ndarray:
    return (truth or SyntheticTruth()).mean(X, t)


def truth_noise(t, truth: Optional[SyntheticTruth] = None) -> np.ndarray:
    return (truth or SyntheticTruth()).noise(t)


def synth_eval(X, T, rng, truth: Optional[SyntheticTruth] = None) -> np.ndarray:
    """Noisy simulator outputs at inputs ``X`` and levels ``T``.

    ``rng`` is a :class:`numpy.random.Generator` (or a seed); draws are
    taken in row order from it.
    """
    truth = truth or SyntheticTruth()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.broadcast_to(np.asarray(T, dtype=float), (X.shape[0],))
    mu = truth.mean(X, T)
    sd = np.sqrt(truth.noise(T))
    if truth.noiseless:
        return mu
    rng = np.random.default_rng(rng)
    return mu + sd * rng.standard_normal(X.shape[0])


def simulate_design(design: Design, seed, truth: Optional[SyntheticTruth] = None) -> np.ndarray:
    """Outputs for every row of a design (one stream seeded by ``seed``)."""
    return synth_eval(design.X, design.T, np.random.default_rng(seed), truth)


@dataclass(frozen=True)
class TruthExceedance:
    probability: float
    std_error: float
    n_mc: int


def truth_exceedance(threshold: float, t: float, n_mc: int = 10**6, seed=0,
                     truth: Optional[SyntheticTruth] = None,
                     block_size: int = 200_000) -> TruthExceedance:
    """Monte Carlo estimate of ``P(xi(U, t) > threshold)`` with ``U`` uniform on the box."""
    if n_mc < 1:
        raise ValueError("n_mc must be at least 1")
    truth = truth or SyntheticTruth()
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < n_mc:
        m = min(block_size, n_mc - done)
        U = rng.random((m, truth.d))
        hits += int(np.count_nonzero(truth.mean(U, t) > threshold))
        done += m
    p = hits / n_mc
    return TruthExceedance(p, float(np.sqrt(p * (1.0 - p) / n_mc)), n_mc)
