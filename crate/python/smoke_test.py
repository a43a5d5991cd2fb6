"""Smoke test for the compiled `latentdrive` extension.

Build first, e.g. `maturin develop -m crates/py/Cargo.toml`, or copy
target/release/liblatentdrive.so to python/latentdrive.so.
"""
import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import latentdrive as ld  # noqa: E402

DOUBLE_WELL = {
    "system": {"kind": "double_well"},
    "dynamics": {"segment_steps": 2000, "baseline_segment_steps": 2000, "stride": 100},
    "learning": {"train": {"epochs": 2}, "hidden": [8], "max_samples": 200},
    "adaptivity": {"max_inference_points": 300},
    "workflow": {"fold": {"kind": "basin", "x_above": 0.0}, "initial_md_tasks": 8, "max_md_tasks": 8,
                 "max_iterations": 100, "aggregate_step_budget": 1000000},
    "scaling": {"steps_per_task": 2000, "stride": 100},
}


def main():
    cfg = json.loads(ld.default_config())
    assert cfg["workflow"]["initial_md_tasks"] == 120

    assert abs(ld.gain_ratio(14.0, 6.0) - 2.33) < 0.01

    a = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]]
    b = [[-y, x, z + 3.0] for x, y, z in a]  # rotated and shifted
    assert ld.kabsch_rmsd(a, b) < 1e-8

    m = ld.contact_matrix(a, 1.2)
    assert m[0][1] == 1 and m[0][2] == 0 and m[1][0] == 1

    text = json.dumps(DOUBLE_WELL)
    rep = json.loads(ld.run_campaign(text, seed=2))
    again = json.loads(ld.run_campaign(text, seed=2))
    assert rep == again
    assert rep["termination"] == "folded", rep["termination"]
    base = ld.run_baseline(text, seed=2)
    g = ld.gain(json.dumps(rep), base)
    assert g > 0 and math.isfinite(g)

    csv = ld.scaling([2, 4], text).splitlines()
    assert csv[0].startswith("tasks,") and len(csv) == 3

    try:
        ld.run_campaign('{"nope": 1}')
    except ValueError as e:
        assert "nope" in str(e)
    else:
        raise AssertionError("unknown key accepted")

    print("python smoke test passed; gain on the double well:", round(g, 3))


if __name__ == "__main__":
    main()
