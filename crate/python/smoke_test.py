"""Smoke test for the compiled extension.

    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
    python python/smoke_test.py
"""
import json
import math
from pathlib import Path

import twinsem_py as ts

ROOT = Path(__file__).resolve().parent.parent


def main():
    listing = (ROOT / "crates/core/tests/data/lgc_paths.R").read_text()
    doc = ts.parse_paths(listing, name="lgc")
    assert len(doc["paths"]) == 23
    assert sum(p["label"] == "e" for p in doc["paths"]) == 3
    assert doc["manifests"] == ["x1", "x2", "x3"]

    assert abs(ts.mvn_rectangle([0, 0], [[1, 0.5], [0.5, 1]], [0, 0], [math.inf, math.inf]) - 1 / 3) < 1e-6

    truth = {"a_r1c1": 0.7, "c_r1c1": 0.5, "e_r1c1": 0.5, "mean_x": 1.0}
    groups = ts.simulate_ace(["x"], truth, 2000, seed=4)
    fit = ts.fit_ace(["x"], groups["MZ"], groups["DZ"])
    est = {e["label"]: e["estimate"] for e in fit["estimates"]}
    assert fit["fit"]["status"] == "converged"
    assert abs(est["mean_x"] - 1.0) < 0.05
    assert abs(est["e_r1c1"] ** 2 - 0.25) < 0.03

    single = {
        "name": "one",
        "manifests": ["x_T1"],
        "latents": [],
        "defvars": [],
        "paths": [
            {"from": "x_T1", "to": "x_T1", "arrows": 2, "label": "v", "value": 1.0},
            {"from": "one", "to": "x_T1", "arrows": 1, "label": "m", "value": 0.0},
        ],
    }
    r = ts.fit_paths(json.dumps(single), {"MZ": groups["MZ"]})
    m = {e["label"]: e["estimate"] for e in r["estimates"]}["m"]
    xs = [v for v in groups["MZ"]["x_T1"] if v is not None]
    assert abs(m - sum(xs) / len(xs)) < 1e-4

    bc = ts.bin_cont({"x": [0.1, 0.9, None]}, ["x"], 0.5)
    assert bc["xbin"] == ["<low>", None, None]
    assert bc["xcont"] == [None, 0.9, None]

    res = ts.residualize({"y": [1.0, 2.0, 4.0, 3.0], "z": [0.0, 1.0, 2.0, 3.0]}, "y ~ z")
    assert abs(sum(res["y"])) < 1e-12

    print("smoke test passed")


if __name__ == "__main__":
    main()
