"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); build failures here must therefore never block installation.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    # -ffp-contract=off: the numpy fallback does mul-then-add in separate
    # instructions; fused multiply-add in the C build would break the
    # bit-for-bit parity the kernel tests assert.
    ext = Extension(
        "hdrkit._fastkernels",
        sources=["src/hdrkit/_fastkernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level=3)
except Exception as exc:  # noqa: BLE001 - any build-chain problem degrades to pure python
    sys.stderr.write(f"hdrkit: building without compiled kernels ({exc})\n")

setup(ext_modules=ext_modules)
