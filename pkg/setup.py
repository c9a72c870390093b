"""Build script for the optional compiled integrator kernel.

The package works without the extension: crmsim.backend falls back to the
pure-Python kernel when the compiled module is absent or fails to import.
Both kernels perform arithmetic in the same order so results agree bitwise.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "crmsim._kernel",
                ["src/crmsim/_kernel.pyx"],
                # -ffp-contract=off keeps the compiler from fusing
                # multiply-adds, which would break bitwise parity with
                # the pure-Python kernel.
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
