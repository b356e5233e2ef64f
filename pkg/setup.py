"""Build the optional compiled gas kernel.

If Cython or a C compiler is unavailable the package still installs and
``mmlab`` falls back to the pure-Python kernel at import time.
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
                "mmlab._gascore",
                ["src/mmlab/_gascore.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:  # pragma: no cover - build environment without Cython
    pass

setup(ext_modules=ext_modules)
