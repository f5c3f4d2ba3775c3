"""Build the optional compiled Dyson kernel.

If Cython is unavailable or compilation fails, the package still installs and
falls back to the numpy implementation at import time.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build-time only
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "schwinger._dyson_kernels",
                ["src/schwinger/_dyson_kernels.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
