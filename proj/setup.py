import os
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
        ext_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        out_dir = ext_path.parent
        out_dir.mkdir(parents=True, exist_ok=True)
        source_dir = Path(__file__).parent.resolve()
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)
        cfg = "Debug" if self.debug else "Release"
        args = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            f"-DCMAKE_BUILD_TYPE={cfg}",
            "-DSKBUILD=ON",
            "-DTPWATE_BUILD_TESTS=OFF",
            f"-DTPWATE_EXT_OUTPUT_DIR={out_dir}",
            f"-DPYTHON_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(args, check=True)
        jobs = os.environ.get("CMAKE_BUILD_PARALLEL_LEVEL", "2")
        subprocess.run(
            ["cmake", "--build", str(build_dir), "--target", "_core", "-j", jobs],
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("tpwate._core")],
    cmdclass={"build_ext": CMakeBuild},
)
