"""Build script: compiles the optional Cython stepping core.

The package is fully functional without the extension (a NumPy fallback is
selected at import time), so a failed compile only degrades speed.
"""

import numpy
from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Never let a missing C toolchain break the install."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: skipping compiled core ({exc}); using NumPy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: could not build {ext.name} ({exc}); using NumPy fallback")


try:
    from Cython.Build import cythonize

    extensions = cythonize(
        "src/langevin_bench/engines/_core.pyx",
        compiler_directives={"language_level": 3},
    )
except ImportError:  # pragma: no cover - cython is a build requirement
    extensions = []

setup(
    ext_modules=extensions,
    include_dirs=[numpy.get_include()],
    cmdclass={"build_ext": optional_build_ext},
)
