"""Build the optional Cython coordinate-descent core.

Without Cython or a C compiler the package still installs and runs on the
pure-Python fallback kernels.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("LOOCV_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "loocv._cd",
                    ["src/loocv/_cd.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
