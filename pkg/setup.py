import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "odtls._accel._fastpath",
                ["src/odtls/_accel/_fastpath.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython available: the pure-numpy backend is selected at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
