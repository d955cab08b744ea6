"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy implementation is
selected at import time), so the build degrades gracefully when Cython
or a C compiler is unavailable.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "ppbo._kernels.cython_backend",
                ["src/ppbo/_kernels/cython_backend.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
