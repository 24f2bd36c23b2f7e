import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install still works; kernels fall back at import
    cythonize = None

extensions = [
    Extension(
        "evdispatch._kernels",
        ["src/evdispatch/_kernels.pyx"],
        include_dirs=[np.get_include()],
        # -ffp-contract=off keeps float results bit-identical to the pure
        # backend (no fused multiply-add in the movement arithmetic).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(extensions, language_level="3") if cythonize else [],
)
