import glob
import os

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

EIGEN_CANDIDATES = ["/usr/include/eigen3", "/usr/local/include/eigen3"]
eigen = next((p for p in EIGEN_CANDIDATES if os.path.isdir(p)), EIGEN_CANDIDATES[0])

ext = Pybind11Extension(
    "_eitsim",
    sorted(glob.glob("src/*.cpp")) + ["python/bindings.cpp"],
    include_dirs=["include", "vendor", eigen],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
