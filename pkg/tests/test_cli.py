import json

import pytest

from pcv.cli import DEFAULT_CONFIGS, main


def test_subprotocol_and_replay(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["subprotocol", "isinsupport", "--runs", "5", "--seed", "2", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("schema,protocol")
    assert main(["replay", str(out / "runs.jsonl"), "--run-id", "3"]) == 0
    line = json.loads(capsys.readouterr().out)
    assert line["identical"] and line["run_id"] == 3 and line["seed"] == 2
    rec = json.loads((out / "runs.jsonl").read_text().splitlines()[2])
    single = tmp_path / "rec.json"
    single.write_text(json.dumps(rec))
    assert main(["replay", str(single)]) == 0


def test_run_with_config_and_overrides(tmp_path, capsys):
    cfg = dict(DEFAULT_CONFIGS["compare"], protocol="compare")
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(path), "--runs", "3", "--set", "gamma=0.2",
                 "--profile", "paper", "--prover", "Honest"]) == 0
    assert "compare" in capsys.readouterr().out


def test_custom_profile(tmp_path, capsys):
    cfg = dict(DEFAULT_CONFIGS["isinsupport"], protocol="isinsupport",
               profile={"name": "mine", "rules": {"isinsupport_queries": {"scale": 1.0, "cap": 3}}})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / "o"
    assert main(["run", "--config", str(path), "--profile", "custom", "--out", str(out)]) == 0
    rec = json.loads((out / "runs.jsonl").read_text().splitlines()[1])
    assert rec["profile"] == "mine" and rec["stats"]["pcond_queries"] <= 3
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps(dict(cfg, profile="paper")))
    assert main(["run", "--config", str(bad), "--profile", "custom"]) == 2
    assert "custom" in capsys.readouterr().err


def test_errors_exit_two(capsys):
    assert main(["run"]) == 2
    assert main(["subprotocol", "isinsupport", "--runs", "0"]) == 2
    with pytest.raises(SystemExit):
        main(["subprotocol", "nope"])


def test_lowerbound(capsys):
    assert main(["lowerbound", "--n", "100000", "--m", "5", "--trials", "300"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["within_bound"] and res["k"] == 5
    assert main(["lowerbound", "--n", "100000", "--m", "10", "--trials", "10"]) == 2


def test_fixtures(tmp_path, capsys):
    path = tmp_path / "f.json"
    assert main(["fixtures", "generate", "kappa_flat", "--n", "500", "--param", "support=20",
                 "--param", "kappa=2", "--out", str(path)]) == 0
    assert main(["fixtures", "inspect", str(path), "--tau", "0.2"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["support"] == 20 and info["max_over_min"] <= 2 and info["histogram"]
    assert main(["fixtures", "generate", "flat", "--n", "8", "--param", "support=4"]) == 0
    assert json.loads(capsys.readouterr().out)["n"] == 8
