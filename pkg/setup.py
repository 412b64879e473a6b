"""Build script for the optional compiled simulation kernel.

The package is fully functional without the extension (a pure-Python
engine is selected at import time), so a failed compile downgrades to a
warning instead of aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Skip the extension (with a warning) when no compiler is usable."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing entirely
            warnings.warn(f"compiled engine skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled engine {ext.name} skipped: {exc}")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        warnings.warn("Cython not available; installing with pure-Python engine only")
        return []
    ext = Extension(
        "cellcache.engine._speedups",
        sources=["src/cellcache/engine/_speedups.pyx"],
        # keep float expressions bit-compatible with the pure-Python engine
        extra_compile_args=["-O2", "-ffp-contract=off"],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
