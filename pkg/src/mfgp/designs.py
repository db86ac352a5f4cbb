"""Experiment designs and the run-cost model.

``lhs`` draws a randomized Latin hypercube. ``nested_design`` builds a
multi-fidelity design where every finer level reuses a subset of the points
of the next coarser level, chosen by greedy maximin distance.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import DesignError

LEVEL_TOL = 1e-6

# hours per run, by mesh size in cm
DEFAULT_COSTS = {100.0: 1.0 / 12.0, 50.0: 1.0, 100.0 / 3.0: 6.0, 25.0: 20.0, 20.0: 54.0}

# reference multi-fidelity design: counts per mesh size (finest level unused)
REFERENCE_MF_LEVELS = (100.0, 50.0, 100.0 / 3.0, 25.0)
REFERENCE_MF_COUNTS = (270, 90, 30, 10)
REFERENCE_HF_LEVEL = 20.0
REFERENCE_HF_COUNT = 100


def unit_box(d: int) -> np.ndarray:
    return np.column_stack([np.zeros(d), np.ones(d)])


def _check_box(box) -> np.ndarray:
    box = np.atleast_2d(np.asarray(box, dtype=float))
    if box.ndim != 2 or box.shape[1] != 2 or box.shape[0] == 0:
        raise DesignError("box must be a (d, 2) array of [lower, upper] rows")
    if not np.all(np.isfinite(box)) or np.any(box[:, 0] >= box[:, 1]):
        raise DesignError("box bounds must be finite with lower < upper")
    return box


def lhs(n: int, box, seed=None) -> np.ndarray:
    """Randomized Latin hypercube of ``n`` points in ``box``.

    Each column has exactly one value in each of the ``n`` equal-width
    strata of its interval, uniformly placed within the stratum.
    """
    if n < 1:
        raise DesignError(f"need at least one point, got n={n}")
    box = _check_box(box)
    d = box.shape[0]
    rng = np.random.default_rng(seed)
    u = np.empty((n, d))
    for j in range(d):
        u[:, j] = (rng.permutation(n) + rng.random(n)) / n
    return box[:, 0] + u * (box[:, 1] - box[:, 0])


def maximin_subset(points: np.ndarray, k: int) -> np.ndarray:
    """Indices of ``k`` rows of ``points`` chosen by greedy maximin distance.

    The first pick is the row nearest the centroid; each next pick maximizes
    the distance to the rows already chosen (lowest index on ties).
    """
    m = points.shape[0]
    if not 0 <= k <= m:
        raise DesignError(f"cannot pick {k} of {m} points")
    if k == 0:
        return np.empty(0, dtype=np.intp)
    centre = points.mean(axis=0, keepdims=True)
    chosen = [int(np.argmin(cdist(points, centre)[:, 0]))]
    mind = cdist(points, points[chosen[-1]][None, :])[:, 0]
    for _ in range(k - 1):
        mind[chosen] = -np.inf
        nxt = int(np.argmax(mind))
        chosen.append(nxt)
        mind = np.minimum(mind, cdist(points, points[nxt][None, :])[:, 0])
    return np.array(chosen, dtype=np.intp)


class DesignKind(str, enum.Enum):
    NESTED_MF = "nested"
    LHS = "lhs"


@dataclass(frozen=True)
class DesignSpec:
    """What to generate: ``levels``/``counts`` pairs over a ``box``."""

    kind: DesignKind
    levels: tuple
    counts: tuple
    box: np.ndarray = field(repr=False)
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", DesignKind(self.kind))
        levels = tuple(float(t) for t in np.atleast_1d(self.levels))
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        if len(levels) != len(counts) or not levels:
            raise DesignError("levels and counts must be non-empty and of equal length")
        if any(t <= 0 for t in levels):
            raise DesignError("fidelity levels must be positive")
        if any(c < 0 for c in counts):
            raise DesignError("counts must be non-negative")
        if self.kind is DesignKind.LHS and len(levels) != 1:
            raise DesignError("an LHS design has a single level")
        # coarsest (largest t) first
        order = sorted(range(len(levels)), key=lambda i: -levels[i])
        levels = tuple(levels[i] for i in order)
        counts = tuple(counts[i] for i in order)
        if any(b - a > -LEVEL_TOL for a, b in zip(levels, levels[1:])):
            raise DesignError("duplicate fidelity levels")
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "box", _check_box(self.box))

    @property
    def d(self) -> int:
        return self.box.shape[0]


@dataclass(frozen=True)
class Design:
    """Design points ``X`` with their fidelity levels ``T``."""

    X: np.ndarray
    T: np.ndarray

    def __len__(self):
        return self.T.shape[0]

    def level_counts(self) -> dict:
        levels, counts = np.unique(self.T, return_counts=True)
        return {float(t): int(c) for t, c in zip(levels, counts)}

    def __add__(self, other: "Design") -> "Design":
        return Design(np.vstack([self.X, other.X]), np.concatenate([self.T, other.T]))


def nested_design(spec: DesignSpec) -> Design:
    """Nested multi-fidelity design, or a plain LHS for a single level.

    Rows are grouped by level, coarsest first. Counts must strictly decrease
    from coarse to fine (trailing zero-count levels are allowed).
    """
    counts = spec.counts
    positive = [c for c in counts if c > 0]
    if not positive:
        raise DesignError("design has no points")
    if any(c == 0 for c in counts[:len(positive)]):
        raise DesignError("zero-count levels may only follow all populated levels")
    if any(b >= a for a, b in zip(positive, positive[1:])):
        raise DesignError(f"counts must strictly decrease from coarse to fine, got {counts}")
    base = lhs(positive[0], spec.box, spec.seed)
    lo, hi = spec.box[:, 0], spec.box[:, 1]
    scaled = (base - lo) / (hi - lo)
    idx = np.arange(positive[0])
    blocks_x, blocks_t = [], []
    for t, c in zip(spec.levels, counts):
        if c == 0:
            continue
        if c < idx.size:
            idx = idx[np.sort(maximin_subset(scaled[idx], c))]
        blocks_x.append(base[idx])
        blocks_t.append(np.full(c, t))
    return Design(np.vstack(blocks_x), np.concatenate(blocks_t))


@dataclass(frozen=True)
class CostTable:
    """Hours per simulator run, keyed by fidelity level."""

    costs: Mapping[float, float] = field(default_factory=lambda: dict(DEFAULT_COSTS))

    def __post_init__(self):
        if any(v <= 0 for v in self.costs.values()):
            raise DesignError("run costs must be positive")

    def cost(self, t: float) -> float:
        for level, hours in self.costs.items():
            if abs(level - t) <= LEVEL_TOL:
                return float(hours)
        raise DesignError(f"no cost for fidelity level {t:g}")


def design_cost(T, costs: Optional[CostTable] = None) -> float:
    """Total hours to run every point; ``T`` is a fidelity vector or a :class:`Design`."""
    costs = costs or CostTable()
    if isinstance(T, Design):
        T = T.T
    levels, counts = np.unique(np.asarray(T, dtype=float), return_counts=True)
    return float(sum(c * costs.cost(t) for t, c in zip(levels, counts)))


def reference_designs(d: int = 8, seed: Optional[int] = None):
    """The multi-fidelity (nested) and high-fidelity (LHS) comparison designs."""
    box = unit_box(d)
    mf = nested_design(DesignSpec(DesignKind.NESTED_MF, REFERENCE_MF_LEVELS,
                                  REFERENCE_MF_COUNTS, box, seed))
    hf_seed = None if seed is None else seed + 1
    hf = nested_design(DesignSpec(DesignKind.LHS, (REFERENCE_HF_LEVEL,),
                                  (REFERENCE_HF_COUNT,), box, hf_seed))
    return mf, hf
