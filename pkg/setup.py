import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

setup(ext_modules=cythonize([
    Extension(
        "gpvortex._ckernels",
        ["src/gpvortex/_ckernels.pyx"],
        extra_compile_args=["-O3"],
        include_dirs=[numpy.get_include()],
    )
], language_level=3))
