"""Build hook for the optional compiled MCMC kernel.

If Cython or a C compiler is missing the package still installs and the
pure-Python kernel is used at runtime.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("vecgnndr.mcmc._kernel", ["src/vecgnndr/mcmc/_kernel.pyx"], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": 3},
        quiet=True,
    )
except Exception:  # pragma: no cover - build environment without Cython
    ext_modules = []

setup(ext_modules=ext_modules)
