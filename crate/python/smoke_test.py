"""Smoke test for the cohevo_py extension.

Build the extension first:

    cargo build --release -p cohevo-py

The script copies target/release/libcohevo_py.so next to a temporary import
path as cohevo_py.so, unless COHEVO_PY_DIR already points at a directory
holding an importable module.
"""

import json
import math
import os
import shutil
import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent


def import_module():
    target = os.environ.get("COHEVO_PY_DIR")
    if target is None:
        lib = ROOT / "target" / "release" / "libcohevo_py.so"
        if not lib.exists():
            sys.exit(f"{lib} not found; run `cargo build --release -p cohevo-py` first")
        target = tempfile.mkdtemp(prefix="cohevo_py_")
        shutil.copy(lib, Path(target) / "cohevo_py.so")
    sys.path.insert(0, target)
    import cohevo_py

    return cohevo_py


def main():
    cp = import_module()

    names = cp.shipped_names()
    assert "rod_linear" in names and "plate_elastic" in names, names

    # rod with a linear law against the closed-form solution
    run = cp.RunConfig.shipped("rod_linear").run()
    assert run.converged and len(run) == 101
    sigma, delta, gamma = run.oracle_errors("linear")
    assert max(sigma, delta, gamma) <= 1e-8, (sigma, delta, gamma)
    for t, g in zip(run.times, run.gamma):
        assert abs(g[0] - 0.25 * max(t - 0.5, 0.0)) <= 1e-8

    # griffith tie at t = 0.6 stays closed
    griffith = cp.RunConfig.shipped("rod_griffith").run()
    i = min(range(len(griffith)), key=lambda k: abs(griffith.times[k] - 0.6))
    assert griffith.jump(i)[0][0] == 0.0 and griffith.jump(i + 1)[0][0] > 0.0

    # proximal map of the increment cost
    law = json.dumps({"type": "linear", "b": 1.0})
    assert cp.prox_increment(law, [3.0], 0.0, 1.0, 1.0) == [2.0]
    assert cp.prox_increment(law, [0.5], 0.0, 1.0, 1.0) == [0.0]
    assert math.isclose(cp.phi(law, [3.0, 4.0]), 5.0)
    try:
        cp.phi(json.dumps({"type": "linear", "b": -1.0}), [1.0])
    except ValueError as e:
        assert "law.b" in str(e)
    else:
        raise AssertionError("negative slope accepted")

    # artifacts round trip through verify
    with tempfile.TemporaryDirectory() as d:
        run.write(d)
        passed, checks = cp.verify(d)
        assert passed, checks
        assert {c["name"] for c in json.loads(checks)} >= {"irreversibility", "energy_balance"}

    report = json.loads(run.report_json())
    assert report["status"]["status"] == "complete"

    cfg = cp.RunConfig.from_json(cp.RunConfig.shipped("rod_unloading").to_json()).with_steps(40)
    unload = cfg.run()
    d = unload.dissipation
    half = len(d) // 2
    assert all(x == d[half] for x in d[half:]), d[half:]

    spec = {
        "base": json.loads(cp.RunConfig.shipped("rod_linear").to_json()),
        "levels": [20, 40, 80],
        "checkpoints": [0.5],
        "oracle": "analytic_1d_linear",
    }
    result = json.loads(cp.study(json.dumps(spec)))
    assert not result["failures"], result["failures"]
    assert len(result["levels"]) == 3

    print(f"cohevo_py smoke test passed ({len(names)} shipped scenarios)")


if __name__ == "__main__":
    main()
