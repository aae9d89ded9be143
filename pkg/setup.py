"""Build hook for the optional compiled kernel.

The package is pure Python plus one Cython extension (synmem._fastpath) that
accelerates per-access Bernoulli fault injection. If Cython or a C compiler
is unavailable, set SYNMEM_SKIP_FASTPATH=1: the package installs without the
extension and falls back to the bit-identical numpy implementation at import.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("SYNMEM_SKIP_FASTPATH") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("synmem._fastpath", ["src/synmem/_fastpath.pyx"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
