"""Build script for the optional compiled tree-splitter kernel.

The package works without the extension (a pure numpy fallback is selected
at import time), so a failed Cython build degrades gracefully instead of
blocking installation.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "pathlens.baselines._splitter",
                ["src/pathlens/baselines/_splitter.pyx"],
                language="c++",
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
