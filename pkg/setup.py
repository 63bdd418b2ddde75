import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension("gmfg._kernels", ["src/gmfg/_kernels.pyx"], include_dirs=[np.get_include()]),
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": 3}))
