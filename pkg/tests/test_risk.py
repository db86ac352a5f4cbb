import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from mfgp.gp import Dataset, NoiseModel, build_model, predict
from mfgp.kernels import KernelSpec, MaternParams
from mfgp.risk import (ExceedanceConfig, exceedance_posterior, kde_density, sample_inputs,
                       silverman_bandwidth, simulation_streams)


def small_model(noise=-4.0, n=15, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 1))
    Z = 50 + 15 * np.sin(5 * X[:, 0])
    spec = KernelSpec.single_level(MaternParams(100.0, (0.3,)))
    return build_model(Dataset(X, np.full(n, 20.0), Z), spec, NoiseModel([20.0], [noise]))


# -- density curves ---------------------------------------------------------------------

def test_kde_symmetric_sample_gives_symmetric_density():
    x = np.random.default_rng(0).beta(2, 5, 400)
    curve = kde_density(np.r_[x, 1 - x])
    assert curve.grid[0] == pytest.approx(1 - curve.grid[-1], abs=1e-12)
    np.testing.assert_allclose(curve.density, curve.density[::-1], atol=1e-6)


def test_kde_uniform_sample_is_flat():
    x = np.random.default_rng(1).random(100_000)
    curve = kde_density(x)
    inner = (curve.grid >= 0.1) & (curve.grid <= 0.9)
    assert np.max(np.abs(curve.density[inner] - 1)) < 0.05
    assert curve.integral() == pytest.approx(1.0, abs=1e-3)


def test_kde_two_points_matches_reflected_bumps():
    samples = np.array([0.3, 0.7])
    curve = kde_density(samples)
    # Silverman: sd = 0.2 sqrt2, IQR = 0.2, so h = 0.9 * (0.2 / 1.34) * 2**-0.2
    h = 0.9 * (0.2 / 1.34) * 2 ** -0.2
    assert curve.bandwidth == pytest.approx(h, rel=1e-12)
    g = curve.grid
    bumps = sum(stats.norm.pdf(g, c, h) + stats.norm.pdf(g, -c, h) + stats.norm.pdf(g, 2 - c, h)
                for c in samples) / 2
    np.testing.assert_allclose(curve.density, bumps, rtol=1e-12, atol=1e-14)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.integers(2, 500), a=st.floats(0.3, 5), b=st.floats(0.3, 5))
def test_kde_is_normalized_density(seed, n, a, b):
    x = np.random.default_rng(seed).beta(a, b, n)
    curve = kde_density(x)
    if curve.is_point_mass:
        return
    assert np.all(curve.density >= 0)
    assert curve.integral() == pytest.approx(1.0, abs=1e-3)


def test_kde_constant_sample_is_point_mass():
    curve = kde_density(np.full(10, 0.25))
    assert curve.is_point_mass and curve.point_mass == 0.25
    assert curve.grid is None
    with pytest.raises(ValueError):
        kde_density([0.2, 1.3])


def test_silverman_rule():
    x = np.random.default_rng(2).normal(0.5, 0.1, 1000)
    iqr = np.subtract(*np.percentile(x, [75, 25]))
    expected = 0.9 * min(x.std(ddof=1), iqr / 1.34) * 1000 ** -0.2
    assert silverman_bandwidth(x) == pytest.approx(expected, rel=1e-12)


# -- exceedance ------------------------------------------------------------------------------

def test_config_validation():
    with pytest.raises(ValueError):
        ExceedanceConfig(n_sim=1)
    with pytest.raises(ValueError):
        ExceedanceConfig(n_pts=1)
    with pytest.raises(ValueError):
        ExceedanceConfig(box=[[0.0, 0.0]])
    with pytest.raises(ValueError):
        ExceedanceConfig(box=[[0.0, 1.0]]).input_box(2)


def test_p_samples_and_determinism():
    model = small_model()
    cfg = ExceedanceConfig(threshold=60.0, n_sim=50, n_pts=300, seed=3)
    a = exceedance_posterior(model, cfg)
    b = exceedance_posterior(model, cfg)
    np.testing.assert_array_equal(a.p_samples, b.p_samples)
    assert a.p_samples.shape == (50,)
    assert np.all((a.p_samples >= 0) & (a.p_samples <= 1))
    assert a.density.integral() == pytest.approx(1.0, abs=1e-3)
    s = a.summary()
    assert s["n_sim"] == 50 and s["n_pts"] == 300
    assert s["q025"] <= s["median"] <= s["q975"]


def test_inputs_follow_box():
    cfg = ExceedanceConfig(n_pts=1000, box=[[2.0, 3.0], [-1.0, 0.0]])
    U = sample_inputs(cfg, 2)
    assert np.all(U[:, 0] >= 2) and np.all(U[:, 0] <= 3)
    assert np.all(U[:, 1] >= -1) and np.all(U[:, 1] <= 0)


def test_extreme_thresholds():
    model = small_model()
    low = exceedance_posterior(model, ExceedanceConfig(threshold=-1e6, n_sim=20, n_pts=100))
    high = exceedance_posterior(model, ExceedanceConfig(threshold=1e6, n_sim=20, n_pts=100))
    assert np.all(low.p_samples == 1.0) and low.density.is_point_mass
    assert np.all(high.p_samples == 0.0) and high.density.is_point_mass


def test_degenerate_posterior_equals_fraction_of_means():
    # dense noiseless data: posterior sd is far below every distance to the threshold
    X = np.linspace(0, 1, 120)[:, None]
    Z = 50 + 15 * np.sin(5 * X[:, 0])
    spec = KernelSpec.single_level(MaternParams(100.0, (0.5,)))
    model = build_model(Dataset(X, np.full(120, 20.0), Z), spec, NoiseModel([20.0], [-60.0]))
    cfg = ExceedanceConfig(threshold=57.3, n_sim=30, n_pts=400, seed=1)
    U = sample_inputs(cfg, 1)
    p = predict(model, U, 20.0)
    assert np.min(np.abs(p.mean - 57.3)) > 50 * np.sqrt(np.max(p.variance_latent))
    res = exceedance_posterior(model, cfg)
    np.testing.assert_array_equal(res.p_samples, np.mean(p.mean > 57.3))


def test_threshold_monotonicity():
    model = small_model(noise=-2.0)
    prev = None
    for thr in (45.0, 55.0, 60.0, 62.0, 70.0):
        p = exceedance_posterior(model, ExceedanceConfig(threshold=thr, n_sim=40, n_pts=200)).p_samples
        if prev is not None:
            assert np.all(p <= prev)
        prev = p


def test_permuting_streams_permutes_samples():
    model = small_model(noise=-2.0)
    cfg = ExceedanceConfig(n_sim=12, n_pts=150, seed=4)
    streams = simulation_streams(cfg)
    perm = np.random.default_rng(0).permutation(12)
    a = exceedance_posterior(model, cfg)
    b = exceedance_posterior(model, cfg, streams=[streams[i] for i in perm])
    np.testing.assert_array_equal(b.p_samples, a.p_samples[perm])


def test_monte_carlo_error_scales_as_inverse_sqrt():
    model = small_model(noise=-2.0, n=8)
    sizes = np.array([250, 1000, 4000])
    spread = []
    for n_sim in sizes:
        cfg = ExceedanceConfig(threshold=58.0, n_sim=int(n_sim), n_pts=200, seed=0)
        means = [exceedance_posterior(model, cfg, streams=np.random.SeedSequence([b, int(n_sim)]).spawn(n_sim)).mean
                 for b in range(20)]
        spread.append(np.std(means, ddof=1))
    slope = np.polyfit(np.log(sizes), np.log(spread), 1)[0]
    assert -0.75 < slope < -0.25
