"""Builds the optional compiled text-metric kernels.

The package works without the extension: ``avemo.evaluation.kernels``
falls back to the pure-Python implementation at import time.
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "avemo.evaluation._ngram_cy",
                ["src/avemo/evaluation/_ngram_cy.pyx"],
                include_dirs=[np.get_include()],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
