"""Build the optional compiled Jacobi kernel.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernel is used instead.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "swarm_cert._jacobi",
                ["src/swarm_cert/_jacobi.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
