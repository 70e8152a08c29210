from setuptools import setup, Extension

import numpy as np

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "retrospect._boost_c",
                ["src/retrospect/_boost_c.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # no Cython: the package runs on the pure-NumPy kernel
    ext_modules = []

setup(ext_modules=ext_modules)
