import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# Compiled propagation core. The package falls back to the pure-NumPy kernel
# at import time if this extension is unavailable.
extensions = [
    Extension(
        "reachset._kernels._core",
        sources=["src/reachset/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
