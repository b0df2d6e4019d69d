import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("PALLOR_SKIP_CYTHON") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "pallor.nn._cyconv",
                    ["src/pallor/nn/_cyconv.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except Exception:
        # The package runs on the NumPy kernel backend when the compiled
        # extension is unavailable.
        ext_modules = []

setup(ext_modules=ext_modules)
