"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so any failure here downgrades to a warning instead of
aborting the install. Set CRIMEPRED_SKIP_EXT=1 to skip compilation.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """build_ext that tolerates a missing/broken C toolchain."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - depends on toolchain
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - depends on toolchain
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            f"WARNING: building the crimepred C extension failed ({exc}); "
            "falling back to the pure-NumPy kernels.",
            file=sys.stderr,
        )


ext_modules = []
if os.environ.get("CRIMEPRED_SKIP_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "crimepred.kernels._ckernels",
                    sources=["src/crimepred/kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level="3",
        )
    except ImportError as exc:  # pragma: no cover - depends on environment
        print(f"WARNING: Cython/NumPy unavailable at build time ({exc}); "
              "building without the compiled kernels.", file=sys.stderr)

setup(ext_modules=ext_modules, cmdclass={"build_ext": optional_build_ext})
