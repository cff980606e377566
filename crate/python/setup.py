"""Packaging shim for the cargo-built extension module.

There is no Rust-aware build backend on the index this environment uses, so
build_ext shells out to cargo and copies the produced cdylib to wherever
setuptools expects the extension. Install with

    pip install -e . --no-build-isolation

from this directory, or skip pip entirely and run smoke_test.py, which can
load the cdylib straight out of the cargo target directory.
"""

import pathlib
import shutil
import subprocess

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.check_call(
            ["cargo", "build", "--release", "-p", "nhim-py"], cwd=REPO_ROOT
        )
        built = REPO_ROOT / "target" / "release" / "libnhim_py.so"
        dest = pathlib.Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, dest)


setup(
    name="nhim-py",
    version="0.1.0",
    description="Python bindings for the invariant-manifold solvers",
    ext_modules=[Extension("nhim_py", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)
