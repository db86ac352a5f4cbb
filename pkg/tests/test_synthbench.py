import numpy as np
import pytest

from mfgp.designs import Design
from mfgp.synthbench import (SyntheticTruth, simulate_design, synth_eval, truth_exceedance,
                             truth_mean, truth_noise)


def test_sample_variance_matches_noise_schedule():
    x = np.full((1, 8), 0.3)
    for t in (100.0, 25.0, 20.0):
        z = synth_eval(np.repeat(x, 100_000, axis=0), t, np.random.default_rng(4))
        assert abs(z.var(ddof=1) / truth_noise(t) - 1) < 0.05
        assert abs(z.mean() - truth_mean(x, t)[0]) < 5 * np.sqrt(truth_noise(t) / 1e5)


def test_error_decays_with_mesh_size():
    truth = SyntheticTruth()
    X = np.random.default_rng(0).random((100, 8))
    coarse_err = np.abs(truth.mean(X, 100.0) - truth.ideal(X))
    fine_err = np.abs(truth.mean(X, 1.0) - truth.ideal(X))
    assert np.all(fine_err <= 0.1 * coarse_err)
    assert np.max(coarse_err) > 1.0  # the error is not trivially small


def test_error_scales_as_power_of_t():
    truth = SyntheticTruth()
    X = np.random.default_rng(1).random((20, 8))
    ref = truth.mean(X, 100.0) - truth.ideal(X)
    for t in (50.0, 100.0 / 3.0, 25.0, 20.0, 0.5):
        ratio = (truth.mean(X, t) - truth.ideal(X)) / ref
        np.testing.assert_allclose(ratio, (t / 100.0) ** 0.8, rtol=1e-12)


def test_noise_positive_and_increasing_with_mesh_size():
    lam = truth_noise([20.0, 25.0, 100.0 / 3.0, 50.0, 100.0])
    assert np.all(lam > 0)
    assert np.all(np.diff(lam) > 0)


def test_zero_noise_mode_is_deterministic():
    truth = SyntheticTruth(noiseless=True)
    X = np.random.default_rng(2).random((10, 8))
    a = synth_eval(X, 50.0, np.random.default_rng(0), truth)
    b = synth_eval(X, 50.0, np.random.default_rng(99), truth)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a, truth.mean(X, 50.0))


def test_draws_are_uncorrelated():
    z = synth_eval(np.full((100_000, 8), 0.5), 20.0, np.random.default_rng(5))
    r = z - z.mean()
    assert abs(r[1:] @ r[:-1] / (r @ r)) < 0.02


def test_inputs_validated():
    with pytest.raises(ValueError):
        truth_mean(np.full((1, 8), 1.5), 20.0)
    with pytest.raises(ValueError):
        truth_mean(np.full((1, 7), 0.5), 20.0)
    with pytest.raises(ValueError):
        truth_mean(np.full((1, 8), 0.5), 0.0)
    with pytest.raises(ValueError):
        SyntheticTruth(d=4)


def test_extra_inputs_are_inert():
    truth = SyntheticTruth(d=10)
    X = np.random.default_rng(3).random((5, 10))
    Y = X.copy()
    Y[:, 8:] = 0.0
    np.testing.assert_array_equal(truth.mean(X, 20.0), truth.mean(Y, 20.0))


def test_simulate_design_deterministic():
    rng = np.random.default_rng(0)
    design = Design(rng.random((6, 8)), np.full(6, 50.0))
    np.testing.assert_array_equal(simulate_design(design, 3), simulate_design(design, 3))
    assert not np.array_equal(simulate_design(design, 3), simulate_design(design, 4))


def test_exceedance_extremes():
    assert truth_exceedance(-1e9, 20.0, n_mc=1000).probability == 1.0
    assert truth_exceedance(1e9, 20.0, n_mc=1000).probability == 0.0


@pytest.mark.slow
def test_exceedance_truth_in_target_range_and_seed_consistent():
    a = truth_exceedance(60.0, 20.0, n_mc=10**6, seed=1)
    b = truth_exceedance(60.0, 20.0, n_mc=10**6, seed=2)
    assert 0.02 <= a.probability <= 0.2
    assert abs(a.probability - b.probability) < 4 * np.hypot(a.std_error, b.std_error)
    assert a.std_error == pytest.approx(np.sqrt(a.probability * (1 - a.probability) / 1e6))
