import csv
import json

import numpy as np
import pytest

from formcalc.cli import CONFIG_SCHEMA, ConfigError, load_config, main, run, to_csv

TRIANGLE = {"experiment": "tri", "space": {"family": "whitney", "n": 2, "k": 1}, "currents": "faces"}
TETRA_K2 = {"experiment": "tet", "space": {"family": "whitney", "n": 3, "k": 2}, "currents": "faces"}
NODAL = {
    "experiment": "nodal",
    "space": {"family": "poly", "n": 1, "k": 0, "r": 2},
    "body": {"kind": "simplex", "vertices": [[0.0], [1.0]]},
    "currents": [{"vertices": [[0.0]]}, {"vertices": [[0.5]]}, {"vertices": [[1.0]]}],
}
QUICK = {"samples": 256, "refine_steps": 60}


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def invoke(tmp_path, command, cfg, *extra):
    out = tmp_path / f"{command}.json"
    code = main([command, "--config", write(tmp_path, cfg), "--out", str(out), *extra])
    return code, (json.loads(out.read_text()) if out.exists() else None)


# --------------------------------------------------------------------------- whitney-check


@pytest.mark.parametrize("cfg", [TRIANGLE, TETRA_K2])
def test_whitney_check_identity(tmp_path, cfg):
    code, rec = invoke(tmp_path, "whitney-check", cfg)
    assert code == 0
    assert rec["results"]["gram_deviation"] < 1e-10
    assert rec["results"]["vandermonde_deviation"] < 1e-10


def test_whitney_check_perturbed_faces(tmp_path):
    faces = [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]], [[0.9, 0.0], [0.0, 0.9]]]
    cfg = dict(TRIANGLE, currents=[{"vertices": v} for v in faces])
    code, rec = invoke(tmp_path, "whitney-check", cfg)
    assert code == 0
    assert rec["results"]["vandermonde_deviation"] > 1e-3
    assert rec["results"]["gram_deviation"] > 1e-3


def test_whitney_check_on_given_simplex(tmp_path):
    cfg = {"experiment": "skew", "currents": "faces",
           "space": {"family": "whitney", "n": 2, "k": 1, "simplex": [[0, 0], [2, 0.3], [0.4, 1.7]]}}
    code, rec = invoke(tmp_path, "whitney-check", cfg)
    assert code == 0 and rec["results"]["vandermonde_deviation"] < 1e-10


# --------------------------------------------------------------------------- estimator commands


def test_lebesgue_nodal(tmp_path):
    code, rec = invoke(tmp_path, "lebesgue", NODAL)
    assert code == 0
    assert rec["results"]["lebesgue"]["value"] == pytest.approx(1.25, rel=1e-3)
    assert set(rec["results"]["lebesgue"]) == {"value", "witness", "budget", "trace"}


def test_lebesgue_whitney_at_least_one(tmp_path):
    code, rec = invoke(tmp_path, "lebesgue", dict(TETRA_K2, estimator=QUICK))
    assert code == 0 and rec["results"]["lebesgue"]["value"] >= 1 - 1e-6


def test_chain_flag_never_lowers(tmp_path):
    cfg = dict(TRIANGLE, estimator=dict(QUICK, chain_samples=64))
    _, plain = invoke(tmp_path, "lebesgue", cfg)
    _, chains = invoke(tmp_path, "lebesgue", cfg, "--chains")
    assert chains["budget"]["chains"] is True
    assert chains["results"]["lebesgue"]["value"] >= plain["results"]["lebesgue"]["value"] - 1e-12


def test_budget_flags_are_recorded(tmp_path):
    _, rec = invoke(tmp_path, "lebesgue", NODAL, "--samples", "64", "--refine-steps", "5")
    assert rec["budget"] == {"samples": 64, "refine_steps": 5, "chains": False}


def test_thm1_ratio(tmp_path):
    code, rec = invoke(tmp_path, "thm1", TRIANGLE)
    res = rec["results"]
    assert code == 0 and res["inequality_holds"]
    assert 0.9 < res["ratio"] <= 1 + 1e-6


def test_opnorm_nodal(tmp_path):
    code, rec = invoke(tmp_path, "opnorm", NODAL)
    assert code == 0
    assert rec["results"]["opnorm_lower_bound"] <= rec["results"]["lebesgue"]["value"] + 1e-6
    assert rec["results"]["opnorm_lower_bound"] == pytest.approx(1.25, rel=1e-3)


def test_thm2_identity(tmp_path):
    cfg = dict(TRIANGLE, map={"A": [[1, 0], [0, 1]]}, trials=20, estimator=QUICK)
    code, rec = invoke(tmp_path, "thm2", cfg)
    res = rec["results"]
    assert code == 0
    assert res["factors"]["thm2factor"] == pytest.approx(1.0)
    assert res["witness_lhs"] == pytest.approx(res["witness_rhs"], rel=1e-10)
    assert res["chain_violations"] == 0 and res["end_to_end_holds"]
    assert res["lebesgue_mapped"] == pytest.approx(res["lebesgue_reference"], rel=1e-9)


def test_thm2_affine(tmp_path):
    cfg = dict(TRIANGLE, map={"A": [[2, 0.5], [0, 1]], "b": [1, -1]}, trials=50, estimator=QUICK)
    code, rec = invoke(tmp_path, "thm2", cfg)
    res = rec["results"]
    assert code == 0 and res["chain_violations"] == 0
    assert res["chain_max_gap"] <= 1e-9
    assert res["witness_lhs"] <= res["witness_rhs"] + 1e-9


def test_perturb_table_and_csv(tmp_path):
    cfg = dict(TRIANGLE, perturb={"eps": [0.1, 0.001], "seeds": [0, 1]}, estimator=QUICK)
    code, rec = invoke(tmp_path, "perturb", cfg)
    assert code == 0
    table = rec["results"]["table"]
    assert len(table) == 4 and {r["status"] for r in table} == {"ok"}
    rows = list(csv.DictReader((tmp_path / "perturb.csv").open()))
    assert [float(r["eps"]) for r in rows] == [r["eps"] for r in table]


def test_map_bound(tmp_path):
    cfg = {"experiment": "mb", "space": {"family": "whitney", "n": 3, "k": 2}, "currents": "faces",
           "map": {"A": [[2, 1, 0], [0, 1, 0], [0, 0.5, 3]]}, "trials": 200}
    code, rec = invoke(tmp_path, "map-bound", cfg)
    res = rec["results"]
    assert code == 0
    assert res["lower_violation"] <= 1e-9 and res["upper_violation"] <= 1e-9
    assert res["factors"]["thm2factor"] <= res["factors"]["condBound"] + 1e-12


def test_scalar_csv(tmp_path):
    invoke(tmp_path, "whitney-check", TRIANGLE)
    rows = dict(csv.reader((tmp_path / "whitney-check.csv").open()))
    assert rows["key"] == "value" and float(rows["gram_deviation"]) < 1e-10


# --------------------------------------------------------------------------- errors and reproducibility


@pytest.mark.parametrize("broken", [
    {"experiment": "x", "space": {"family": "whitney", "n": 2, "k": 1}},
    dict(TRIANGLE, space={"family": "lagrange", "n": 2, "k": 1}),
    dict(TRIANGLE, weights=[1.0, -1.0, 1.0]),
    dict(TRIANGLE, estimator={"sample": 10}),
    dict(TRIANGLE, space={"family": "whitney", "n": 2, "k": 3}),
    dict(NODAL, currents="faces"),
    dict(NODAL, weights=[1.0, 1.0]),
    dict(TRIANGLE, body={"kind": "box", "lower": [0, 0, 0], "upper": [1, 1, 1]}),
    dict(TRIANGLE, map={"A": [[1, 2], [2, 4]]}),
])
def test_config_errors_exit_2_without_output(tmp_path, broken):
    code, rec = invoke(tmp_path, "lebesgue", broken)
    assert code == 2 and rec is None
    assert not list(tmp_path.glob("*.csv"))


def test_unreadable_config(tmp_path):
    assert main(["lebesgue", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["lebesgue", "--config", str(bad)]) == 2


def test_thm2_without_map_is_config_error(tmp_path):
    assert invoke(tmp_path, "thm2", TRIANGLE)[0] == 2


def test_not_determining_exits_3(tmp_path, capsys):
    cfg = dict(NODAL, currents=[{"vertices": [[0.0]]}, {"vertices": [[0.0]]}, {"vertices": [[1.0]]}])
    code, rec = invoke(tmp_path, "lebesgue", cfg)
    assert code == 3 and rec is None
    assert "NotDetermining" in capsys.readouterr().err


def test_degenerate_support_exits_3(tmp_path):
    cfg = dict(TRIANGLE, currents=[{"vertices": [[0, 0], [0, 0]]}] * 3)
    assert invoke(tmp_path, "whitney-check", cfg)[0] == 3


def test_deterministic_records(tmp_path):
    cfg = dict(TRIANGLE, estimator=QUICK)
    a = run("opnorm", cfg, seed=4)
    b = run("opnorm", cfg, seed=4)
    a.pop("wall_time"), b.pop("wall_time")
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_seed_flag_overrides_config(tmp_path):
    code, rec = invoke(tmp_path, "lebesgue", dict(NODAL, seed=1), "--seed", "9")
    assert code == 0 and rec["seed"] == 9


def test_stdout_when_no_out(tmp_path, capsys):
    assert main(["whitney-check", "--config", write(tmp_path, TRIANGLE)]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["command"] == "whitney-check" and rec["experiment"] == "tri"


def test_record_round_trips(tmp_path):
    _, rec = invoke(tmp_path, "lebesgue", NODAL)
    assert json.loads(json.dumps(rec)) == rec
    assert set(rec) == {"experiment", "command", "seed", "budget", "results", "wall_time"}


def test_load_config_builds_objects():
    exp = load_config(dict(TRIANGLE, weights=[1, 2, 3], tol=1e-4), seed=5)
    assert exp.cfg.M == 3 and np.allclose(exp.cfg.weights, [1, 2, 3])
    assert exp.seed == 5 and exp.estimator.seed == 5 and exp.tol == 1e-4
    with pytest.raises(ConfigError):
        load_config({"experiment": 1})
    assert "properties" in CONFIG_SCHEMA


def test_to_csv_flattens_nested():
    text = to_csv("thm2", {"factors": {"upper": 2.0}, "ok": True})
    assert "factors.upper,2.0" in text and "ok,True" in text


@pytest.mark.parametrize("name", ["whitney_triangle", "whitney_tetra_k2", "nodal_quadratic",
                                  "whitney_affine_map", "poly_fit_box"])
def test_shipped_configs_validate(name):
    from pathlib import Path

    path = Path(__file__).resolve().parents[1] / "scripts" / "configs" / f"{name}.json"
    load_config(json.loads(path.read_text()))
