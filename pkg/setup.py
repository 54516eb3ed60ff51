from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize
except ImportError:  # build without the compiled kernels; numpy fallback is used
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("radlimit._ckernels", ["src/radlimit/_ckernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
