"""Smoke test for the Python bindings.

Run after `pip install -e python --no-build-isolation` (from the repo
root), or standalone: it falls back to loading the extension straight
from the cargo target directory.
"""

import importlib.util
import json
import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def load_module():
    try:
        import pgn_toolkit  # noqa: F401

        return pgn_toolkit
    except ImportError:
        pass
    so = ROOT / "target" / "release" / "libpgn_py.so"
    if not so.exists():
        subprocess.check_call(
            ["cargo", "build", "--release", "-p", "pgn-py"], cwd=ROOT
        )
    spec = importlib.util.spec_from_file_location("pgn_py", so)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    m = load_module()
    checks = 0

    c = m.example_canvas()
    assert c.is_valid(), c.violations()
    assert c.switch_numbers() == ["20", "22", "25"]
    assert c.eval("21") == ["1", "2", "4", "6", "8"]
    checks += 3

    rt = json.loads(c.to_json())
    c2 = m.Canvas.from_json(json.dumps(rt))
    assert c2.switch_numbers() == c.switch_numbers()
    checks += 1

    assert m.theta(["2", "1", "1", "2"]) == ["1/3", "1/2", "1/2", "2/3"]
    assert m.theta_inv(["1/3", "1/2", "1/2", "2/3"]) == ["2", "1", "1", "2"]
    assert m.theta(["inf", "0", "0", "inf"])[0] == "0"
    checks += 3

    g = m.geometric_canvas(2, 40, "1")
    sw = g.switch_numbers()
    quad = m.ratio_quadruple(g, sw[4], sw[-2])
    assert quad == ["1/3", "1/2", "1/2", "2/3"], quad
    checks += 1

    res = m.successive_minima([0, 0, 1], "7")
    assert res["exact"] and res["lambda_sq_lo"] == ["1", "1", "49"]
    checks += 1

    r = m.random_canvas(2, "10", 3, 5)
    out = m.realize(r, 192)
    assert out["measured_sup_approx"] <= 13.546, out
    checks += 1

    sys_json = json.dumps(
        {
            "n": 2,
            "gamma": "0",
            "M": [
                {
                    "q0": "0",
                    "v0": "0",
                    "segments": [["2", 0], ["2", 1], ["inf", 0]],
                },
                {"q0": "0", "v0": "0", "segments": [["inf", 1]]},
            ],
        }
    )
    reduced = json.loads(m.reduce_system(sys_json))
    assert reduced["n"] == 2
    rc = m.rigidify_system(sys_json, "1", "40")
    assert rc.is_valid()
    checks += 2

    print(f"ok: {checks} binding checks passed")


if __name__ == "__main__":
    sys.exit(main())
