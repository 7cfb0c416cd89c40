"""Build hook for the optional compiled propagation kernel.

The package works without the extension (a pure-Python kernel is selected
at import time); building it just makes large campaigns much faster.
"""

import os

from setuptools import Extension, setup

ext_modules = []
try:
    if not os.path.exists("src/leaksim/engine/_kernel.pyx"):
        raise ImportError("kernel source not present")
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "leaksim.engine._kernel",
                ["src/leaksim/engine/_kernel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
