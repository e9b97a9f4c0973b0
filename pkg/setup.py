from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "sepcache._kernels",
                ["src/sepcache/_kernels.pyx"],
                # -ffp-contract=off: no FMA contraction, so the compiled FFT
                # butterflies round exactly like the NumPy fallback;
                # -fno-builtin-sin/-cos: stop GCC fusing cos+sin into glibc
                # sincos, which rounds differently from separate calls
                extra_compile_args=[
                    "-O3",
                    "-ffp-contract=off",
                    "-fno-builtin-sin",
                    "-fno-builtin-cos",
                    "-fno-builtin-sincos",
                ],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
