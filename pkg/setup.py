import os

from setuptools import setup

ext_modules = []
if os.environ.get("HYBRID_RADAR_NO_EXT", "") not in ("1", "true", "yes"):
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("hybrid_radar._kernels._ckernels", ["src/hybrid_radar/_kernels/_ckernels.pyx"],
                       include_dirs=[numpy.get_include()],
                       define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                       extra_compile_args=["-O3", "-fno-math-errno", "-fno-trapping-math",
                                           "-fassociative-math", "-fno-signed-zeros"])],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
