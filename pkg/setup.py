"""Build script for the optional compiled Monte Carlo kernel.

The package works without the extension: frameport._kernels falls back to a
pure-numpy implementation when the compiled module is unavailable.
"""
import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "frameport._kernels._mc_core",
                ["src/frameport/_kernels/_mc_core.pyx"],
                extra_compile_args=["-O3"],
                language="c",
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
