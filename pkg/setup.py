from setuptools import setup, Extension

import numpy as np

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: the numpy fallback is used at runtime
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "mfgp._core._matern_ext",
                ["src/mfgp/_core/_matern_ext.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
