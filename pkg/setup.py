"""Build the optional compiled kernels.

The package works without them: ``plhl.kernels`` falls back to numpy when
``plhl._ckernels`` cannot be imported. Set ``PLHL_NO_EXT=1`` to skip the build.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PLHL_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "plhl._ckernels",
                    ["src/plhl/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
