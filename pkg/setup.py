"""Build script: compiles the optional C scan/lookup kernels.

The package is pure Python plus one Cython extension (odbx._kernels._native)
holding the two hot loops: the packed-event-word scan and the
closest-previous timestamp lookup. If the extension cannot be built the
package still installs and falls back to the pure-Python kernels.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "odbx._kernels._native",
                ["src/odbx/_kernels/_native.pyx"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
