import os

import numpy
from setuptools import Extension, setup

try:
    if not os.path.exists("src/snake_locomanip/engine/_core.pyx"):
        raise ImportError
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "snake_locomanip.engine._core",
                sources=["src/snake_locomanip/engine/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError:
    # Pure-python fallback kernel is selected at import time when the
    # compiled extension is unavailable.
    ext_modules = []

setup(ext_modules=ext_modules)
