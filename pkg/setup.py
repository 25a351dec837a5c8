"""Build script: compiles the optional split-step extension when Cython and a
C compiler are available, otherwise installs pure-Python only (the package
falls back to its numpy kernels at import time)."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("SQHHG_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "sqhhg._kernels._splitstep",
                    ["src/sqhhg/_kernels/_splitstep.pyx"],
                    extra_compile_args=["-O3", "-fno-math-errno"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
