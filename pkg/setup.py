"""Build hook for the optional compiled kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so any failure to compile degrades to a warning
rather than breaking the install.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "noiselib._kernels",
                sources=["src/noiselib/_kernels.pyx", "src/noiselib/_scanops.c"],
                include_dirs=[np.get_include(), "src/noiselib"],
                extra_compile_args=["-O3", "-march=native", "-fopenmp-simd"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
    print(f"noiselib: skipping compiled kernels ({exc}); "
          "falling back to the pure-numpy backend", file=sys.stderr)

setup(ext_modules=ext_modules)
