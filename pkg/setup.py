"""Build script for the optional compiled kernel.

The package works without the extension (a NumPy fallback is selected at
import); a failed compile therefore degrades the install instead of
breaking it.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class _OptionalBuildExt(build_ext):
    """build_ext that downgrades compiler failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # missing compiler, broken toolchain
            warnings.warn(f"compiled kernel skipped: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"compiled kernel {ext.name} skipped: {exc}")


extensions = [
    Extension(
        "uavcov._kernels._core",
        ["src/uavcov/_kernels/_core.pyx"],
        extra_compile_args=["-O3"],
    )
]

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        extensions, compiler_directives={"language_level": "3"}
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": _OptionalBuildExt})
