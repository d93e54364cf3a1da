import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

EIGEN = os.environ.get("EIGEN3_INCLUDE_DIR", "/usr/include/eigen3")

ext = Pybind11Extension(
    "_uldyn",
    sources=[
        "bindings/pymodule.cpp",
        "src/noise.cpp",
        "src/potentials.cpp",
        "src/dynamics.cpp",
        "src/analysis.cpp",
        "src/lattice.cpp",
        "src/experiments.cpp",
    ],
    include_dirs=["include", "vendor", EIGEN],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
