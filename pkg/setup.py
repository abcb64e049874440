import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("NLMS_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        print("Cython or numpy missing: building the pure-Python package only", file=sys.stderr)
    else:
        omp = [] if sys.platform == "win32" else ["-fopenmp"]
        ext_modules = cythonize(
            [
                Extension(
                    "nlms._kernels",
                    ["src/nlms/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"] + omp,
                    extra_link_args=omp,
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
