"""Build the optional compiled kernels.

Flags stay conservative (no fast-math, no host-specific tuning, no merged
sincos calls) so the compiled and pure-Python kernels produce identical
floating-point results.
If Cython or a compiler is missing the package installs without the
extension and falls back to ``hybridcr._kernels_py``.
"""

import os
import sys

from setuptools import setup

ext_modules = []
if os.environ.get("HYBRIDCR_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "hybridcr._kernels",
                    ["src/hybridcr/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O2", "-fno-fast-math", "-ffp-contract=off",
                                        "-fno-builtin-sin", "-fno-builtin-cos"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError as exc:  # pragma: no cover - build environment dependent
        print(f"hybridcr: building without compiled kernels ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
