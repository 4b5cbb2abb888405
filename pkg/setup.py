"""Build hook for the optional compiled kernels.

The package is pure Python plus one small Cython extension holding the
coordinatewise hot loops. The extension is optional: if Cython or a C
compiler is unavailable the install still succeeds and the numpy fallback
backend is used at import time.

-ffp-contract=off keeps the C arithmetic bitwise identical to the numpy
backend (no fused multiply-add contraction).
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "sesopt._kernels._fast",
                ["src/sesopt/_kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
