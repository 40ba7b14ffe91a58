"""Build script: compiles the optional speedup extension.

The package is fully functional without the extension (pure-Python kernels
are selected at import time); the build therefore tolerates a missing or
failing C toolchain.
"""

import sys

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "cavrisk._speedups",
                ["src/cavrisk/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": 3},
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    sys.stderr.write(f"cavrisk: skipping compiled kernels ({exc}); "
                     "pure-Python fallback will be used\n")

setup(ext_modules=ext_modules)
