"""Build script for the compiled Euler-Maruyama stepping kernel.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile degrades speed, not functionality.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "sdeident._em_c",
                ["src/sdeident/_em_c.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
