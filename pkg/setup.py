from setuptools import Extension, setup

# The compiled integrator kernel is optional: if Cython or a C compiler is
# missing, the package falls back to the pure-Python kernel at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "qapm._native",
                ["src/qapm/_native.pyx"],
                # -ffp-contract=off keeps double arithmetic bit-identical
                # to the pure-Python kernel (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
