import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

setup(
    ext_modules=cythonize(
        [Extension("gradiv._kernels", ["src/gradiv/_kernels.pyx"], include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        language_level=3,
    ),
)
