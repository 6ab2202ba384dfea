import csv
import json
import os

import pytest

from winplan import config
from winplan.cli import main

FAST = {"n_sp": 400, "b_min": 20, "b_max": 200, "eps_tau": 2e-3, "eps_xi": 1e-3}


def scenario_file(tmp_path, name="s1", estimator=None, edit=None):
    doc = config.load_document(config.preset_path(name))
    doc["estimator"].update(FAST if estimator is None else estimator)
    if edit:
        edit(doc)
    path = tmp_path / f"{name}.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(tmp_path, *argv, out="out"):
    out = str(tmp_path / out)
    code = main(list(argv) + ["--out", out])
    return code, out


def test_power_bundle(tmp_path):
    code, out = run(tmp_path, "power", scenario_file(tmp_path), "--exact")
    assert code == 0
    assert sorted(os.listdir(out)) == ["decomposition.csv", "diagnostics.json", "results.csv", "timing.json"]
    rows = {r["measure"]: r for r in read_csv(os.path.join(out, "results.csv"))}
    assert set(rows) == {"WR", "NB", "WO", "DOOR"}
    wr = rows["WR"]
    assert float(wr["power_closed_form"]) == pytest.approx(0.85, abs=0.03)
    assert wr["power_exact"] and wr["seed"] == "20240601" and len(wr["config_hash"]) == 16
    diag = json.loads(open(os.path.join(out, "diagnostics.json")).read())
    assert diag["exit_code"] == 0 and diag["config_hash"] == wr["config_hash"]
    levels = read_csv(os.path.join(out, "decomposition.csv"))
    assert {r["hypothesis"] for r in levels} == {"H0", "HA"}


def test_zero_effect_power(tmp_path):
    def no_effect(doc):
        for ep in doc["endpoints"]:
            ep["effect"]["value"] = 0
    path = scenario_file(tmp_path, edit=no_effect)
    code, out = run(tmp_path, "power", path, "--measures", "nb")
    assert code == 0
    (row,) = read_csv(os.path.join(out, "results.csv"))
    assert float(row["power_closed_form"]) == pytest.approx(0.025, abs=0.01)


def test_six_significant_digits(tmp_path):
    code, out = run(tmp_path, "power", scenario_file(tmp_path), "--measures", "wr")
    (row,) = read_csv(os.path.join(out, "results.csv"))
    digits = row["a_alt"].lstrip("0.").replace(".", "").split("e")[0]
    assert len(digits) <= 6


def test_samplesize(tmp_path):
    code, out = run(tmp_path, "samplesize", scenario_file(tmp_path), "--exact", "--measures", "wr,door,nb")
    assert code == 0
    rows = {r["measure"]: r for r in read_csv(os.path.join(out, "results.csv"))}
    assert int(rows["WR"]["m"]) == pytest.approx(274, rel=0.1)
    assert int(rows["WR"]["N"]) == 2 * int(rows["WR"]["m"])
    assert rows["NB"]["m"] == rows["DOOR"]["m"]
    assert int(rows["WR"]["m_exact"]) >= int(rows["WR"]["m"])


def test_simulate(tmp_path):
    code, out = run(tmp_path, "simulate", scenario_file(tmp_path), "--reps", "200", "--measures", "wr")
    assert code == 0
    rows = read_csv(os.path.join(out, "results.csv"))
    assert [r["hypothesis"] for r in rows] == ["H0", "HA"]
    assert all(r["n_reps"] == "200" for r in rows)


def test_calibrate_observed_preset(tmp_path):
    code, out = run(tmp_path, "calibrate", "--preset", "heartfid_observed")
    assert code == 0
    rows = read_csv(os.path.join(out, "results.csv"))
    assert [r["method"] for r in rows] == ["harrell_2c_minus_1", "harrell_2c_minus_1", "kendall_tau_b"]
    for r in rows:
        assert float(r["K_sim"]) == pytest.approx(float(r["K_target"]), abs=0.005)


def test_calibrate_targets_file(tmp_path):
    targets = tmp_path / "k.json"
    targets.write_text(json.dumps({"K": [0.3]}))
    code, out = run(tmp_path, "calibrate", scenario_file(tmp_path), "--targets", str(targets))
    assert code == 0
    (row,) = read_csv(os.path.join(out, "results.csv"))
    assert float(row["rho_cal"]) > 0.3


def test_grid_rows(tmp_path):
    code, out = run(tmp_path, "grid", scenario_file(tmp_path, "s2"), "--rho", "0,0.8",
                    "--measures", "wr", "--reps", "100")
    assert code == 0
    rows = read_csv(os.path.join(out, "grid.csv"))
    assert [r["rho_12"] for r in rows] == ["0", "0.8"]
    assert float(rows[0]["wr_power"]) > float(rows[1]["wr_power"])
    assert rows[0]["wr_power_ties"] and rows[0]["wr_power_emp"]


def test_grid_point_failure_keeps_other_rows(tmp_path):
    grid = tmp_path / "grid.json"
    grid.write_text(json.dumps({"points": [{"rho": 0.2}, {"R": [[1, 2], [2, 1]]}]}))
    code, out = run(tmp_path, "grid", scenario_file(tmp_path), "--grid", str(grid), "--measures", "wr")
    assert code == 1
    rows = read_csv(os.path.join(out, "grid.csv"))
    assert rows[0]["status"] == "converged" and rows[0]["error"] == ""
    assert rows[1]["status"] == "failed" and rows[1]["error"]


def test_single_point_grid_matches_power(tmp_path):
    path = scenario_file(tmp_path)
    run(tmp_path, "grid", path, "--rho", "0", "--measures", "wr", out="g")
    run(tmp_path, "power", path, "--measures", "wr", out="p")
    g = read_csv(str(tmp_path / "g" / "grid.csv"))[0]
    p = read_csv(str(tmp_path / "p" / "results.csv"))[0]
    assert g["wr_power"] == p["power_closed_form"]


def test_config_error_exit(tmp_path, capsys):
    path = scenario_file(tmp_path, edit=lambda d: d["design"].update(alpha=2))
    code, _ = run(tmp_path, "power", path)
    assert code == 1
    assert "/design/alpha" in capsys.readouterr().err


def test_missing_scenario(tmp_path):
    assert run(tmp_path, "power")[0] == 1


def test_numeric_exit(tmp_path):
    def all_ties(doc):
        for ep in doc["endpoints"]:
            ep["threshold"] = 1e6
    code, out = run(tmp_path, "power", scenario_file(tmp_path, edit=all_ties), "--measures", "wr,nb")
    assert code == 2
    rows = {r["measure"]: r for r in read_csv(os.path.join(out, "results.csv"))}
    assert rows["WR"]["power_closed_form"] == ""
    diag = json.loads(open(os.path.join(out, "diagnostics.json")).read())
    assert diag["problems"]


def test_not_converged_exit_still_writes(tmp_path):
    tight = dict(FAST, b_min=2, b_max=5, eps_tau=1e-9, eps_xi=1e-9)
    code, out = run(tmp_path, "power", scenario_file(tmp_path, estimator=tight))
    assert code == 3
    assert read_csv(os.path.join(out, "results.csv"))


def test_outputs_do_not_depend_on_workers(tmp_path):
    path = scenario_file(tmp_path, "s3")
    outs = [run(tmp_path, "power", path, "--workers", str(w), out=f"w{w}")[1] for w in (1, 3)]
    for name in ("results.csv", "decomposition.csv", "diagnostics.json"):
        a, b = (open(os.path.join(o, name), "rb").read() for o in outs)
        assert a == b, name
