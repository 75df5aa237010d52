"""Build script for the optional compiled GRU kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the extension is only a speedup. Set AWLAB_NO_EXT=1
to skip the build, e.g. on a box without a C compiler.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("AWLAB_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "awlab.kernels._gru_cy",
                    ["src/awlab/kernels/_gru_cy.pyx"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
