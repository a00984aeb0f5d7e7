"""Smoke test for the cohflow Python extension.

Build and install first, e.g.

    pip install maturin
    maturin develop -m crates/py/Cargo.toml --release

then run `python python/smoke_test.py`.
"""

import json
import math
import tempfile
from pathlib import Path

import cohflow


def check(cond, what):
    if not cond:
        raise AssertionError(what)
    print(f"ok  {what}")


def main():
    u, v = cohflow.double_gyre_velocity(0.5, 0.5, 0.0)
    check(abs(u) < 1e-15 and abs(v) < 1e-15, "left gyre centre is stagnant at t = 0")
    u, v = cohflow.duffing_velocity(1.0, 0.0, 0.0)
    check((u, v) == (0.0, 0.0), "duffing equilibrium at (1, 0), t = 0")
    check("double-gyre" in cohflow.Field.names(), "field registry lists the double gyre")

    grid = cohflow.GridSpec(0.0, 2.0, 0.0, 1.0, 1 / 16)
    time = cohflow.TimeSpec.over(15.0, 0.1)
    check(grid.node_count == 33 * 17 and time.steps == 150, "grid and time resolution")

    e = cohflow.Ensemble.build(cohflow.Field("double-gyre"), grid, time)
    check(len(e) == grid.node_count and e.feature_len == 2 * 151, "ensemble shape")
    check(e.trajectory(0)[0] == (0.0, 0.0), "first sample is the seed")

    c = cohflow.kmeans(e, 40, seed=1)
    check(all(b <= a + 1e-12 for a, b in zip(c.history, c.history[1:])), "WCSS never increases")
    check(sorted(set(c.labels)) == list(range(40)), "every cluster is used")

    f = cohflow.wcve_field(e, c)
    check(f.quantity == "wcve-sd" and len(f) == len(e), "WCVE field")
    per_cluster = {}
    for label, value in zip(c.labels, f.values):
        per_cluster.setdefault(label, set()).add(value)
    check(all(len(s) == 1 for s in per_cluster.values()), "WCVE is constant per cluster")

    rows = [[0.0], [0.1], [10.0], [10.1]]
    blobs = cohflow.kmeans(rows, 2, seed=0, restarts=5)
    check(math.isclose(blobs.wcss, 0.01, rel_tol=1e-12), "two 1D blobs, WCSS 0.01")

    saddle = cohflow.Ensemble.build(
        cohflow.Field("linear-saddle"),
        cohflow.GridSpec(-1.0, 1.0, -1.0, 1.0, 1 / 16),
        cohflow.TimeSpec(0.01, 100),
    )
    ftle = cohflow.ftle_field(saddle)
    check(abs(ftle.get(8, 8) - 1.0) < 1e-3, "saddle FTLE is 1")

    aligned = cohflow.Ensemble.build(cohflow.Field("double-gyre"), grid, cohflow.TimeSpec(0.1, 152))
    ac, af, ops = cohflow.adaptive_wcve(aligned, 40, levels=3, seed=1)
    check(ac.centroids and len(ac.centroids[0]) == aligned.feature_len and ops > 0, "adaptive refinement")

    s = cohflow.OnTheFly.start(e, 10, 40, seed=1)
    s.advance(10)
    s.retarget(5)
    check(s.z == 5 and [st[0] for st in s.stages] == [10, 20, 5], "on-the-fly state moves both ways")
    oc, of, oops = cohflow.onthefly_wcve(e, 40, alpha=10, seed=1)
    check(len(oc.labels) == len(e) and oops > 0, "on-the-fly sweep")

    with tempfile.TemporaryDirectory() as tmp:
        cfg = {
            "field": {"name": "double-gyre"},
            "grid": {"xmin": 0, "xmax": 2, "ymin": 0, "ymax": 1, "dx": 0.125},
            "time": {"dt": 0.1, "horizon": 5},
            "task": "wcve",
            "k": 10,
            "seed": 2,
        }
        a = cohflow.run_config(json.dumps(cfg), output=str(Path(tmp) / "a"))
        b = cohflow.rerun(str(Path(tmp) / "a" / "manifest.json"), output=str(Path(tmp) / "b"))
        same = (Path(a["output"]) / "wcve.csv").read_bytes() == (Path(b["output"]) / "wcve.csv").read_bytes()
        check(same, "manifest re-run reproduces the CSV")
        back = cohflow.ScalarField.read_csv(str(Path(a["output"]) / "wcve.csv"))
        check(back.values == a["field"].values, "CSV round trip")

    try:
        cohflow.GridSpec(0.0, 1.0, 0.0, 1.0, 0.3)
    except ValueError:
        check(True, "non-commensurate grid raises ValueError")
    else:
        raise AssertionError("expected ValueError")

    print("smoke test passed")


if __name__ == "__main__":
    main()
