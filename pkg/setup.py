import os

import numpy as np
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("IOTVOTE_NO_EXT", "0") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pure-Python install, fallback kernels are used
        cythonize = None
    if cythonize is not None:
        extensions = [
            Extension(
                "iotvote._kernels._ckernels",
                ["src/iotvote/_kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                # keep arithmetic bit-identical to the numpy fallback
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
