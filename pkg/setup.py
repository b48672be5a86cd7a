"""Build script: compiles the optional fast-kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time), so a failed compile degrades to a pure install instead of
aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "gcatkit._kernels._fast",
                ["src/gcatkit/_kernels/_fast.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    import sys

    print(f"fast kernels disabled ({exc}); installing pure-python backend only", file=sys.stderr)

setup(ext_modules=ext_modules)
