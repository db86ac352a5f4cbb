import numpy as np
import pytest

from mfgp.gp import Dataset, NoiseModel, build_model
from mfgp.kernels import KernelSpec, MaternParams, TemporalCorrParams, Variant


def random_spec(rng, variant, d, t_scale=4.0, nu=None):
    """Kernel with log-uniform random hyperparameters."""
    nu = nu if nu is not None else float(rng.choice([0.5, 1.5, 2.5]))

    def mp(dim):
        return MaternParams(np.exp(rng.uniform(-1, 1)), np.exp(rng.uniform(-1.5, 0.5, dim)), nu)

    variant = Variant.parse(variant)
    if variant is Variant.TWO_SCALE:
        return KernelSpec.two_scale(mp(d), mp(d),
                                    TemporalCorrParams(rng.uniform(0.2, 3.0), t_scale))
    if variant is Variant.STATIONARY:
        return KernelSpec.stationary(mp(d + 1))
    return KernelSpec.single_level(mp(d))


def random_dataset(rng, n, d, levels=(1.0, 2.0, 4.0)):
    X = rng.random((n, d))
    T = rng.choice(levels, n)
    Z = np.sin(3 * X[:, 0]) + 0.3 * T + 0.1 * rng.standard_normal(n)
    return Dataset(X, T, Z)


def random_model(rng, variant="two-scale", n=12, d=2, noise=True):
    levels = (3.0,) if Variant.parse(variant) is Variant.SINGLE_LEVEL else (1.0, 2.0, 4.0)
    ds = random_dataset(rng, n, d, levels)
    spec = random_spec(rng, variant, d)
    logv = rng.uniform(-5, -2, ds.levels.size) if noise else np.full(ds.levels.size, -30.0)
    return build_model(ds, spec, NoiseModel(ds.levels, logv))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


VARIANTS = ["two-scale", "stationary", "single-level"]
