"""Build script for the optional compiled kernels.

The package works without the extension: ``msprox._backend`` falls back to the
NumPy kernels when ``msprox._ckernels`` cannot be imported.  Set
``MSPROX_NO_EXT=1`` to skip compilation entirely.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("MSPROX_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:  # build deps missing: pure-Python install
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "msprox._ckernels",
                    ["src/msprox/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
