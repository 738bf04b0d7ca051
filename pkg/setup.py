"""Build script: compiles the optional Cython kernel core.

The package is fully functional without the extension (a vectorized numpy
fallback is selected at import time), so any failure to cythonize or compile
is demoted to a warning rather than aborting the install.
"""

import warnings

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/halfline/_kernels.pyx"],
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": "3",
        },
    )
    include_dirs = [numpy.get_include()]
    for ext in ext_modules:
        ext.include_dirs = include_dirs
except Exception as exc:  # Cython or numpy missing: fall back to pure python
    warnings.warn(f"skipping compiled kernels ({exc}); using numpy fallback")
    ext_modules = []

setup(ext_modules=ext_modules)
