"""Build script for the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so the build degrades gracefully when Cython or a C compiler
is unavailable, or when DETCAL_PURE_PYTHON is set.
"""

import os

from setuptools import Extension, setup


def _extensions():
    if os.environ.get("DETCAL_PURE_PYTHON"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "detcal._kernels",
        ["src/detcal/_kernels.pyx"],
        extra_compile_args=["-O3", "-march=native", "-ffast-math", "-fopenmp"],
        # -lm goes through the glibc linker script, which adds libmvec for
        # the vectorized math calls that -ffast-math emits.
        extra_link_args=["-fopenmp", "-lm"],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=_extensions())
