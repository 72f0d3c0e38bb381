"""Builds the _core extension by driving the project's CMake configuration.

The usual scikit-build route isn't assumed to be available, so this is the
classic "CMakeExtension" arrangement: setuptools calls cmake, cmake produces
medgenius/_core*.so, and the build_ext step copies it into the package.
"""

import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).resolve().parent
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        try:
            import pybind11

            pybind11_dir = pybind11.get_cmake_dir()
        except ImportError:
            pybind11_dir = ""

        configure = [
            "cmake",
            "-S",
            str(source_dir),
            "-B",
            str(build_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DMEDGENIUS_PYTHON=ON",
            "-DMEDGENIUS_BUILD_TESTS=OFF",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
        ]
        if pybind11_dir:
            configure.append(f"-Dpybind11_DIR={pybind11_dir}")
        subprocess.run(configure, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core", "-j"],
            check=True,
        )

        staged = list((build_dir / "python" / "medgenius").glob("_core*"))
        if not staged:
            raise RuntimeError("cmake did not produce the _core module")
        dest = Path(self.get_ext_fullpath(ext.name)).resolve()
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(staged[0], dest)


setup(
    ext_modules=[CMakeExtension("medgenius._core")],
    cmdclass={"build_ext": CMakeBuild},
)
