"""Smoke test of the Python bindings.

Imports nhim_py if it is installed; otherwise builds the extension crate
with cargo and loads the cdylib directly, so the test needs no packaging
backend. Checks the closed-form photon-orbit radius, the Newton solve, the
expansion rates, and the torus-model identities against their known values.
"""

import importlib.machinery
import math
import pathlib
import subprocess
import sys

REPO_ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_module():
    try:
        import nhim_py

        return nhim_py
    except ImportError:
        pass

    subprocess.check_call(["cargo", "build", "-p", "nhim-py"], cwd=REPO_ROOT)
    so = REPO_ROOT / "target" / "debug" / "libnhim_py.so"
    loader = importlib.machinery.ExtensionFileLoader("nhim_py", str(so))
    spec = importlib.util.spec_from_loader("nhim_py", loader)
    module = importlib.util.module_from_spec(spec)
    loader.exec_module(module)
    return module


def main():
    nhim_py = load_module()

    r = nhim_py.trapped_radius(1.0, 0.0)
    assert abs(r - 3.0) < 1e-12, f"photon-sphere radius {r}"

    expected = 2.0 * (1.0 + math.cos((2.0 / 3.0) * math.acos(-0.5)))
    r_pro = nhim_py.trapped_radius(1.0, 0.5, prograde=True)
    assert abs(r_pro - expected) < 1e-12, f"prograde radius {r_pro} vs {expected}"

    solved = nhim_py.trapped_solve(1.0, 0.0)
    assert abs(solved["r"] - 3.0) < 1e-10, f"solved radius {solved['r']}"
    assert max(abs(x) for x in solved["residuals"]) < 1e-9, solved["residuals"]

    rates = nhim_py.expansion_rates(1.0, 0.0)
    nu_expected = 6.0 * math.sqrt(3.0)
    assert abs(rates["nu_min"] - nu_expected) / nu_expected < 1e-3, rates

    torus = nhim_py.torus_verify()
    for key in ("w_u", "w_s", "bracket"):
        assert abs(torus[key] - 1.0) < 1e-5, (key, torus[key])

    try:
        nhim_py.trapped_radius(1.0, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("superextremal parameters should raise ValueError")

    print("smoke test passed")
    return 0


if __name__ == "__main__":
    sys.exit(main())
