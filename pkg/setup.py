"""Build script for the optional compiled kernel core.

The extension accelerates the GEV log-likelihood and the adaptive MCMC
loop; the package falls back to a numpy implementation when the build
is unavailable, so the extension failing to compile is not fatal.

    python setup.py build_ext --inplace
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "gevbayes._ckernels",
                ["src/gevbayes/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
