"""Build the optional Cython kernels.

The package works without them: ``coopgeo.kernels`` falls back to the
numpy implementations when the extension cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("COOPGEO_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "coopgeo._ckernels",
                    ["src/coopgeo/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
