"""CMake bridge: builds the pybind11 extension with the same CMakeLists the
C++ targets use, then drops the resulting _core module into the package."""

import pathlib
import shutil
import subprocess
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = pathlib.Path(__file__).resolve().parent
        build_dir = pathlib.Path(self.build_temp) / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)

        out_path = pathlib.Path(self.get_ext_fullpath(ext.name)).resolve()
        out_path.parent.mkdir(parents=True, exist_ok=True)

        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                f"-DPYTHON_EXECUTABLE={sys.executable}",
                "-DGTRM_BUILD_TESTS=OFF",
            ],
            check=True,
        )
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core", "-j"],
            check=True,
        )

        built = sorted(build_dir.glob("_core*.so")) + sorted(build_dir.glob("**/_core*.so"))
        if not built:
            raise RuntimeError("CMake build did not produce the _core module")
        shutil.copy2(built[0], out_path)


setup(
    packages=["gtrm"],
    package_dir={"gtrm": "python/gtrm"},
    ext_modules=[CMakeExtension("gtrm._core")],
    cmdclass={"build_ext": CMakeBuild},
)
