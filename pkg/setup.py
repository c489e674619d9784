import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# EQUIDECOMP_NO_EXT=1 skips the compiled core; the package then runs on the
# pure-Python kernels.
ext_modules = []
if not os.environ.get("EQUIDECOMP_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "equidecomp._ckernels",
                ["src/equidecomp/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )

setup(ext_modules=ext_modules)
