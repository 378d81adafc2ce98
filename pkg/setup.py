"""Build script for the compiled solver kernels.

The package works without the extension (a NumPy fallback is selected at
import time), so a failed compile only costs speed, not functionality.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:  # source-only install: skip the extension
    ext_modules = []
else:
    extensions = [
        Extension(
            "tdompc._kernels",
            ["src/tdompc/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ]
    ext_modules = cythonize(
        extensions, compiler_directives={"language_level": "3"}
    )

setup(ext_modules=ext_modules)
