from setuptools import Extension, setup

# The dependency-scan kernel is optional: if Cython (or a C compiler) is
# missing, the package falls back to the pure-Python implementation at import.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "s4oc._depscan",
                ["src/s4oc/_depscan.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
