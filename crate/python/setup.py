import shutil
import subprocess
from pathlib import Path

from setuptools import setup
from setuptools.command.build_py import build_py

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent


class BuildWithCargo(build_py):
    """Compile the Rust extension with cargo and ship it as package data."""

    def run(self):
        subprocess.check_call(["cargo", "build", "--release", "-p", "pgn-py"], cwd=ROOT)
        built = ROOT / "target" / "release" / "libpgn_py.so"
        dest = HERE / "pgn_toolkit" / "pgn_py.so"
        shutil.copy2(built, dest)
        super().run()


setup(
    name="pgn-toolkit",
    version="0.1.0",
    description="Rigid systems, (n,γ)-systems and lattice minima",
    packages=["pgn_toolkit"],
    package_data={"pgn_toolkit": ["*.so"]},
    cmdclass={"build_py": BuildWithCargo},
    zip_safe=False,
)
