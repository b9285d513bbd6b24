"""Build script for the optional compiled kernel core.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed, not functionality.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/pdmc/kernels/_core.pyx",
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "initializedcheck": False,
            "cdivision": True,
        },
    )
    for ext in ext_modules:
        ext.include_dirs = [numpy.get_include()]
        # -ffp-contract=off keeps the compiled arithmetic bit-identical to
        # the numpy fallback (no fused multiply-add contraction).
        ext.extra_compile_args = ["-O3", "-ffp-contract=off"]
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"pdmc: compiled kernels disabled ({exc}); using pure-python fallback",
          file=sys.stderr)
    ext_modules = []

setup(ext_modules=ext_modules)
