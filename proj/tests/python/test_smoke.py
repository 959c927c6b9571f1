import json
import math

import numpy as np
import pytest

import dcue


def test_chisq():
    assert dcue.chisq_quantile(0.95, 1) == pytest.approx(3.841458820694124, rel=1e-9)
    assert dcue.chisq_cdf(dcue.chisq_quantile(0.3, 7), 7) == pytest.approx(0.3, abs=1e-9)
    assert dcue.chisq_sf(2.0, 2.0) == pytest.approx(math.exp(-1.0), rel=1e-12)
    with pytest.raises(dcue.ConfigError):
        dcue.chisq_quantile(2.0, 1)


def test_generate_and_estimate():
    data = dcue.generate("s1", seed=3, n=500, m=5, cp=30, beta0=1.0)
    assert data["z"].shape == (500, 5)
    assert data["x"].shape == (500, 3)
    res = dcue.estimate(data["y"], data["d"], data["z"], data["x"], methods=["cue", "tsls"], seed=3)
    assert [r["method"] for r in res["methods"]] == ["cue", "tsls"]
    cue = res["methods"][0]
    assert abs(cue["beta_hat"] - 1.0) < 5 * cue["se"]
    assert cue["inference"]["j_df"] == 4
    assert res["first_stage_f"] > 0


def test_estimate_matches_csv(tmp_path):
    data = dcue.generate("s1", seed=4, n=300, m=3)
    path = tmp_path / "d.csv"
    cols = ["y", "d", "z1", "z2", "z3", "x1", "x2", "x3"]
    table = np.column_stack([data["y"], data["d"], data["z"], data["x"]])
    with open(path, "w") as f:
        f.write(",".join(cols) + "\n")
        for row in table:
            f.write(",".join(repr(float(v)) for v in row) + "\n")
    a = dcue.estimate(data["y"], data["d"], data["z"], data["x"], methods="cue", seed=9)
    b = dcue.estimate_csv(path, "y", "d", ["z1", "z2", "z3"], ["x1", "x2", "x3"], methods="cue", seed=9)
    assert a["methods"][0]["beta_hat"] == b["methods"][0]["beta_hat"]
    with pytest.raises(dcue.DataError):
        dcue.estimate_csv(path, "y", "d", ["z9"], [])


def test_just_identified_has_no_j():
    data = dcue.generate("s1", seed=5, n=400, m=1)
    res = dcue.estimate(data["y"], data["d"], data["z"], data["x"], methods="cue", learner={"kind": "linear"})
    inf = res["methods"][0]["inference"]
    assert inf["just_identified"] is True
    assert "j_stat" not in inf


def test_simulate_and_tables():
    out = dcue.simulate("s1", n=200, m=4, cp=30, reps=3, seed=2, methods=["cue", "tsls"])
    cell = out["cell"]
    assert [r["method"] for r in cell["rows"]] == ["cue", "tsls"]
    assert len(out["records"]) == 6
    again = dcue.simulate("s1", n=200, m=4, cp=30, reps=3, seed=2, methods=["cue", "tsls"], workers=2)
    assert again["cell"] == cell
    md = dcue.render_table([cell])
    assert md.splitlines()[0].startswith("| Method | CP | m |")
    assert json.loads(dcue.render_table([cell], "json"))[0]["rows"] == cell["rows"]
    with pytest.raises(dcue.ConfigError):
        dcue.simulate("s1", reps=0)


def test_selftest():
    results = dcue.selftest(instances=20)
    assert len(results) == 4
    assert all(r["passed"] for r in results)
