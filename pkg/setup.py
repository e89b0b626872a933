"""Build the optional Cython kernels.

The package works without them: ``sedpool.kernels`` falls back to the
pure-Python implementations when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SEDPOOL_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "sedpool._kernels",
                    ["src/sedpool/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        import warnings

        warnings.warn("Cython/numpy unavailable; installing pure-Python kernels only")

setup(ext_modules=ext_modules)
