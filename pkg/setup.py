"""Build script for the compiled CCM core.

The extension is optional: if Cython or a C compiler is unavailable the
package still installs and falls back to the pure-Python backend at import
time (see sfsim.crypto.backend).
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "sfsim.crypto._ccmcore",
                ["src/sfsim/crypto/_ccmcore.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
