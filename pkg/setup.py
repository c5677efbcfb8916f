"""Build script: compiles the coordinate-descent core when Cython is available.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile should not block installation.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "pdsseries._cd",
                sources=["src/pdsseries/_cd.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
