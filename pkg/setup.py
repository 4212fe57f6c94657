"""Build script for the optional compiled convolution kernels.

The package works without the extension (a NumPy fallback is selected at
import time); building it just makes the conv-heavy training loop faster.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "aurel.kernels._cyconv",
                ["src/aurel/kernels/_cyconv.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
