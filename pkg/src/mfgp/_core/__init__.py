"""Numerical core for Matérn covariance blocks.

Two interchangeable implementations are provided:

_matern_ext
    Compiled Cython kernels (fused distance + correlation loops).
_matern_py
    Pure numpy/scipy fallback with the same signatures.

The compiled one is used when it imports cleanly, unless the environment
variable ``MFGP_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""
import os

from . import _matern_py

NU_CODES = {0.5: 0, 1.5: 1, 2.5: 2}

_force_py = os.environ.get("MFGP_PURE_PYTHON", "") not in ("", "0")

if _force_py:
    impl = _matern_py
    BACKEND = "python"
else:
    try:
        from . import _matern_ext as impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        impl = _matern_py
        BACKEND = "python"

__all__ = ["impl", "BACKEND", "NU_CODES", "_matern_py"]
