import csv
import io
import json

import numpy as np
import pytest
from scipy.stats import binomtest

from pcv.errors import InvalidParameter
from pcv.harness import (PROTOCOLS, STAT_FIELDS, ExperimentConfig, read_records, replay, report_csv,
                         run_experiment, run_one, summarize)

ISIN = {"protocol": "isinsupport", "fixture": {"name": "flat", "params": {"n": 1000, "support": 50}},
        "params": {"beta": 0.1}, "runs": 100, "seed": 11}


def test_isinsupport_completeness():
    rep, recs = run_experiment(ISIN)
    assert rep.runs == 100 and rep.accepts + rep.rejects == 100
    assert rep.ci_high >= 0.9
    assert all(r["y_in_support"] for r in recs)


def test_byte_identical_outputs(tmp_path):
    run_experiment(ISIN, out=str(tmp_path / "a"))
    run_experiment(ISIN, out=str(tmp_path / "b"))
    for name in ("runs.jsonl", "summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_parallel_matches_serial(tmp_path):
    cfg = dict(ISIN, runs=12)
    run_experiment(cfg, jobs=1, out=str(tmp_path / "a"))
    run_experiment(cfg, jobs=2, out=str(tmp_path / "b"))
    assert (tmp_path / "a" / "runs.jsonl").read_bytes() == (tmp_path / "b" / "runs.jsonl").read_bytes()


def test_config_validation():
    with pytest.raises(InvalidParameter):
        ExperimentConfig.from_json(dict(ISIN, runs=0))
    with pytest.raises(InvalidParameter):
        ExperimentConfig.from_json(dict(ISIN, protocol="nope"))
    with pytest.raises(InvalidParameter):
        ExperimentConfig.from_json(dict(ISIN, extra=1))
    with pytest.raises(InvalidParameter):
        ExperimentConfig.from_json(dict(ISIN, profile="nope"))
    with pytest.raises(InvalidParameter):
        run_experiment(dict(ISIN, fixture={"name": "nope", "params": {"n": 10}}))


def test_csv_recomputed_from_jsonl(tmp_path):
    run_experiment(dict(ISIN, runs=40), out=str(tmp_path))
    recs = read_records(str(tmp_path / "runs.jsonl"))
    header = json.loads((tmp_path / "runs.jsonl").read_text().splitlines()[0])
    assert header["header"] and header["schema"] == "pcv.run/1"
    row = next(csv.DictReader(io.StringIO((tmp_path / "summary.csv").read_text())))
    acc = sum(r["accepted"] for r in recs)
    ci = binomtest(acc, len(recs)).proportion_ci(0.95, method="wilson")
    assert int(row["runs"]) == len(recs) and int(row["accepts"]) == acc
    assert float(row["accept_rate"]) == acc / len(recs)
    assert float(row["ci_low"]) == ci.low and float(row["ci_high"]) == ci.high
    for k in STAT_FIELDS:
        assert float(row[f"mean_{k}"]) == float(np.mean([r["stats"][k] for r in recs]))
        assert int(row[f"max_{k}"]) == max(r["stats"][k] for r in recs)
    assert report_csv(summarize(recs, "isinsupport")) == (tmp_path / "summary.csv").read_text()


def test_replay_identical_and_detects_tampering():
    rec = json.loads(json.dumps(run_one(ISIN, 5)))
    new, same = replay(rec)
    assert same and new == rec
    rec["accepted"] = not rec["accepted"]
    assert not replay(rec)[1]


def test_records_carry_ledger_and_seed():
    rec = run_one(ISIN, 3)
    assert rec["seed"] == 11 and rec["run_id"] == 3
    assert rec["ledger"] == rec["stats"]


def test_transcripts(tmp_path, monkeypatch):
    monkeypatch.setenv("PCV_LOG_TRANSCRIPTS", "1")
    run_experiment(dict(ISIN, runs=3), out=str(tmp_path))
    lines = [json.loads(x) for x in (tmp_path / "transcripts.jsonl").read_text().splitlines()]
    assert {r["run_id"] for r in lines} == {0, 1, 2}


@pytest.mark.parametrize("protocol,fixture,params", [
    ("compare", {"name": "two_level", "params": {"n": 100, "sizes": [10, 10], "ratio": 2.0, "shuffle": False}},
     {"x": 10, "y": 0}),
    ("estimate-neighborhood", {"name": "flat", "params": {"n": 1000, "support": 50}},
     {"kappa": 0.1, "beta": 0.1, "eta": 0.1, "delta": 0.1}),
    ("sampler", {"name": "flat", "params": {"n": 1000, "support": 50}},
     {"kappa": 0.1, "beta": 0.1, "eta": 0.1, "delta": 0.1}),
    ("test1", {"name": "flat", "params": {"n": 10000, "support": 110}}, {"claim": [20, 100, 122, 412]}),
    ("test2", {"name": "flat", "params": {"n": 10000, "support": 110}}, {"claim": [20, 100, 122, 412]}),
    ("support-small", {"name": "flat", "params": {"n": 10000, "support": 40}}, {"claim": [20, 40, 50, 100]}),
    ("approx-single", {"name": "flat", "params": {"n": 1000, "support": 30}}, {"tau": 0.2}),
    ("histogram", {"name": "point", "params": {"n": 2, "element": 1}}, {"tau_prime": 0.1}),
])
def test_every_protocol_runs(protocol, fixture, params):
    rec = run_one({"protocol": protocol, "fixture": fixture, "params": params}, 0)
    assert rec["protocol"] == protocol and rec["ledger"] == rec["stats"]
    assert json.loads(json.dumps(rec)) == rec
    assert protocol in PROTOCOLS
