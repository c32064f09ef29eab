"""Build the optional compiled kernels.

The package works without them; ``pcfilter.kernels`` falls back to numpy
when ``pcfilter._ckernels`` cannot be imported.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PCFILTER_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "pcfilter._ckernels",
                    ["src/pcfilter/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
