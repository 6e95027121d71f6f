"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-Python fallback with
identical outputs is selected at import time), so any failure to build
it is non-fatal.  Set BLOCKREDUCE_NO_EXT=1 to skip the build entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("BLOCKREDUCE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "blockreduce._kernels",
                    ["src/blockreduce/_kernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
