"""Build script. The compiled kernel is optional: if Cython or a C compiler
is unavailable the build degrades to a pure-Python wheel and the package
selects the interpreted fallback at import time."""

import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/lobexec/_kernels/_core.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"lobexec: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
