"""The compiled and pure-Python Matérn cores must agree."""
import os
import subprocess
import sys

import numpy as np
import pytest

from mfgp import _core
from mfgp._core import _matern_py

ext = pytest.importorskip("mfgp._core._matern_ext")


@pytest.mark.parametrize("nu_code", [0, 1, 2])
def test_cross_block_agrees(rng, nu_code):
    XA = rng.random((40, 5))
    XB = rng.random((30, 5))
    inv_rho = 1.0 / rng.uniform(0.1, 2.0, 5)
    a = ext.matern_cross(XA, XB, inv_rho, 1.7, nu_code)
    b = _matern_py.matern_cross(XA, XB, inv_rho, 1.7, nu_code)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("nu_code", [0, 1, 2])
def test_symmetric_grad_block_agrees(rng, nu_code):
    X = rng.random((25, 3))
    X[5] = X[7]  # duplicate row: zero distance off the diagonal
    inv_rho = 1.0 / rng.uniform(0.1, 2.0, 3)
    Ka, Ga = ext.matern_sym_grad(X, inv_rho, 0.8, nu_code)
    Kb, Gb = _matern_py.matern_sym_grad(X, inv_rho, 0.8, nu_code)
    np.testing.assert_allclose(Ka, Kb, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(Ga, Gb, rtol=1e-10, atol=1e-15)
    assert np.array_equal(Ka, Ka.T) and np.array_equal(Ga, Ga.T)


def test_scaled_distance_agrees(rng):
    XA, XB = rng.random((10, 4)), rng.random((12, 4))
    inv_rho = np.array([1.0, 2.0, 0.5, 3.0])
    np.testing.assert_allclose(ext.scaled_distance(XA, XB, inv_rho),
                               _matern_py.scaled_distance(XA, XB, inv_rho), rtol=1e-13)


def test_extension_rejects_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        ext.matern_cross(rng.random((3, 2)), rng.random((3, 3)), np.ones(2), 1.0, 2)


def test_compiled_backend_selected_by_default():
    assert _core.BACKEND == "cython" or os.environ.get("MFGP_PURE_PYTHON")


def test_env_var_forces_fallback():
    code = "import mfgp._core as c; print(c.BACKEND)"
    env = dict(os.environ, MFGP_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "python"
