"""Build script for the optional compiled inner-loop extension.

The package works without the extension (crossreg.core falls back to the
NumPy implementation); set CROSSREG_NO_EXTENSION=1 to skip compiling it.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("CROSSREG_NO_EXTENSION") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("crossreg.core_cy", ["src/crossreg/core_cy.pyx"])],
            language_level=3,
        )

setup(ext_modules=ext_modules)
