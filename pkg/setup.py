import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled decoder is an optional fast path; the package falls back to
# the pure-Python twin when the extension is absent or TLSLAYERS_NO_EXT is set.
ext_modules = []
if cythonize is not None and not os.environ.get("TLSLAYERS_NO_EXT"):
    ext_modules = cythonize(
        [Extension("tlslayers._decode_cy", ["src/tlslayers/_decode_cy.pyx"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
