"""Build script with an optional compiled kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); the Cython module only accelerates the hot loops.
Build in place with:  python setup.py build_ext --inplace
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the extension if possible, fall back to pure Python otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or Cython missing
            print(f"confcurv: skipping native kernels ({exc!r}); "
                  "pure-Python fallback will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"confcurv: failed to build {ext.name} ({exc!r}); "
                  "pure-Python fallback will be used")


ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/confcurv/_kernels/_native.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    print("confcurv: Cython not available; building without native kernels")

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
