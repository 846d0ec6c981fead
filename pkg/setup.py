import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "tpsurf._pairwise",
                ["src/tpsurf/_pairwise.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    # pure-Python fallback is selected at import time; the package works
    # without the compiled kernel, just slower
    ext_modules = []

setup(ext_modules=ext_modules)
