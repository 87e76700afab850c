"""Batch Monte Carlo runs of any protocol, with JSONL/CSV outputs and replay."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import binomtest

from . import primitives as prim
from .distributions import Bucketing, approx_histogram
from .errors import InvalidParameter
from .fixtures import load_fixture
from .histogram import PointMassClaim, approximate_single, bucket_distance, verify_histogram
from .oracles import InstrumentedOracle, TranscriptLog, draw_samples
from .profiles import get_profile
from .provers import SupportContext, honest_relevant_buckets, make_prover
from .rng import RngStream
from .support_size import (SupportClaim, test1_large, test2_large, verify_support_large,
                           verify_support_small)

RUN_SCHEMA = "pcv.run/1"
SUMMARY_SCHEMA = "pcv.summary/1"
STAT_FIELDS = ("samples_drawn", "pcond_queries", "bits_sent_to_prover", "bits_sent_to_verifier", "rounds")

PROTOCOLS = ("compare", "isinsupport", "estimate-neighborhood", "sampler", "test1", "test2",
             "support-small", "support-large", "approx-single", "histogram")


@dataclass
class ExperimentConfig:
    protocol: str
    fixture: dict
    prover: dict = field(default_factory=lambda: {"kind": "Honest"})
    params: dict = field(default_factory=dict)
    profile: object = "relaxed-default"
    runs: int = 1
    seed: int = 0
    out: str | None = None

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise InvalidParameter(f"unknown protocol {self.protocol!r}; known: {PROTOCOLS}")
        if int(self.runs) < 1:
            raise InvalidParameter("runs must be at least 1")
        get_profile(self.profile)

    def to_json(self) -> dict:
        prof = self.profile if isinstance(self.profile, (str, dict)) else self.profile.to_json()
        return {"protocol": self.protocol, "fixture": self.fixture, "prover": self.prover,
                "params": self.params, "profile": prof, "runs": self.runs, "seed": self.seed}

    @classmethod
    def from_json(cls, obj: dict) -> ExperimentConfig:
        known = {"protocol", "fixture", "prover", "params", "profile", "runs", "seed", "out"}
        extra = set(obj) - known
        if extra:
            raise InvalidParameter(f"unknown config keys {sorted(extra)}")
        return cls(**obj)


@dataclass
class ExperimentReport:
    protocol: str
    runs: int
    accepts: int
    rejects: int
    accept_rate: float
    ci_low: float
    ci_high: float
    stats_mean: dict
    stats_max: dict

    def to_json(self):
        return dict(self.__dict__)


# ------------------------------------------------------------------ single runs

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if hasattr(v, "to_json"):
        return v.to_json()
    return v


def _truth_ratio(dist, x, y):
    px, py = dist.probs[x], dist.probs[y]
    return math.inf if py == 0 else px / py


def _run_compare(dist, p, profile, oracle, prover, rng):
    x, y = int(p.get("x", 0)), int(p.get("y", 1))
    out = prim.compare(oracle, x, y, p.get("gamma", 0.05), p.get("beta", 0.05), p.get("K", 2.0), profile)
    return out.kind == prim.ESTIMATE, {"outcome": out.kind, "alpha": out.alpha,
                                       "true_ratio": _truth_ratio(dist, x, y)}


def _run_isinsupport(dist, p, profile, oracle, prover, rng):
    x = int(p.get("x_ref", int(dist.support[0])))
    y = int(p.get("y", int(dist.support[-1])))
    yes = prim.is_in_support(oracle, x, y, p.get("beta", 0.1), profile)
    return yes, {"outcome": "Yes" if yes else "No", "y_in_support": bool(dist.probs[y] > 0)}


def _run_estimate(dist, p, profile, oracle, prover, rng):
    x = int(p.get("x", int(dist.support[0])))
    beta = p.get("beta", 0.1)
    eta = p.get("eta", 0.1)
    est = prim.estimate_neighborhood(oracle, x, p.get("kappa", 0.1), beta, eta, p.get("delta", 0.1),
                                     rng, profile)
    return est.w_hat > (1 + eta) * beta, est.to_json()


def _run_sampler(dist, p, profile, oracle, prover, rng):
    x = int(p.get("x", int(dist.support[0])))
    kappa, beta, eta = p.get("kappa", 0.1), p.get("beta", 0.1), p.get("eta", 0.1)
    est = prim.estimate_neighborhood(oracle, x, kappa, beta, eta, p.get("delta", 0.1), rng, profile)
    y = prim.sample_from_neighborhood(oracle, est, x, kappa, beta, eta, profile)
    return y is not None, {"estimate": est.to_json(), "sample": y}


def _claim(p):
    return SupportClaim(*p["claim"])


def _context(p):
    # the prover sees the claim it is defending
    return SupportContext(claim=_claim(p))


def _support_record(dist, p, res):
    return {"claim": list(p["claim"]), "truth_support": dist.support_size, "outcome": res.label,
            "reason": res.reason, **res.details}


def _run_test1(dist, p, profile, oracle, prover, rng):
    A_, A = p["claim"][0], p["claim"][1]
    x_ref = int(p["x_ref"]) if "x_ref" in p else int(draw_samples(oracle, 1, "reference_sample")[0])
    res = test1_large(oracle, prover, x_ref, A, A_, rng, profile, _context(p))
    return res.accepted, _support_record(dist, p, res)


def _run_test2(dist, p, profile, oracle, prover, rng):
    res = test2_large(oracle, prover, p["claim"][2], p["claim"][3], rng, _context(p))
    return res.accepted, _support_record(dist, p, res)


def _run_small(dist, p, profile, oracle, prover, rng):
    res = verify_support_small(oracle, prover, _claim(p), p.get("alpha", 0.0), p.get("delta_c", 0.1),
                               p.get("delta_s", 0.1), rng, profile, _context(p))
    return res.accepted, _support_record(dist, p, res)


def _run_large(dist, p, profile, oracle, prover, rng):
    res = verify_support_large(oracle, prover, _claim(p), p.get("alpha", 0.0), p.get("delta", 0.1),
                               rng, profile, _context(p), early_stop=bool(p.get("early_stop", False)))
    return res.accepted, _support_record(dist, p, res)


def _run_single(dist, p, profile, oracle, prover, rng):
    tau = p.get("tau", 0.2)
    bk = Bucketing(dist.n, tau)
    reps = prover.relevant_buckets(bk)
    if p.get("bucket") is None:
        # certify the representative of the heaviest bucket, under whatever tag the prover gives it
        masses = approx_histogram(dist, bk).masses
        K, _ = honest_relevant_buckets(dist, bk)
        j, y = reps[K.index(max(K, key=lambda b: masses[b]))]
    else:
        j = int(p["bucket"])
        y = dict(reps)[j]
    res = approximate_single(oracle, prover, PointMassClaim.make(y, j, bk), tau,
                             p.get("delta_prime", 0.1), rng, profile)
    true_bucket = int(bk.indices(dist.probs[y]))
    return res.accepted, {"outcome": res.label, "reason": res.reason, "true_bucket": true_bucket,
                          **res.details}


def _run_histogram(dist, p, profile, oracle, prover, rng):
    tau_prime = p.get("tau_prime", 0.1)
    res = verify_histogram(oracle, prover, tau_prime, rng, profile, p.get("tau"))
    details = {k: v for k, v in res.details.items() if k != "histogram"}
    rec = {"tau_prime": tau_prime, "outcome": res.label, "reason": res.reason,
           "learned_histogram": None, "rl_to_truth": None, **details}
    if res.accepted:
        h = res.details["histogram"]
        rec["learned_histogram"] = h.to_json()
        rec["rl_to_truth"] = bucket_distance(h, approx_histogram(dist, h.bucketing))
    return res.accepted, rec


RUNNERS = {
    "compare": _run_compare, "isinsupport": _run_isinsupport, "estimate-neighborhood": _run_estimate,
    "sampler": _run_sampler, "test1": _run_test1, "test2": _run_test2, "support-small": _run_small,
    "support-large": _run_large, "approx-single": _run_single, "histogram": _run_histogram,
}


_FIXTURE_CACHE: dict = {}


def _fixture(spec):
    key = json.dumps(spec, sort_keys=True)
    if key not in _FIXTURE_CACHE:
        _FIXTURE_CACHE.clear()
        _FIXTURE_CACHE[key] = load_fixture(spec)
    return _FIXTURE_CACHE[key]


def run_one(config: ExperimentConfig | dict, run_id: int, transcript_path: str | None = None) -> dict:
    """Execute one run; identical ``(config, run_id)`` give identical records."""
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_json(config)
    dist = _fixture(cfg.fixture)
    profile = get_profile(cfg.profile)
    root = RngStream(cfg.seed, run_id)
    log = TranscriptLog(run_id=run_id, path=transcript_path)
    oracle = InstrumentedOracle(dist, root.child("oracle"), log=log)
    prover = make_prover(cfg.prover, dist, root.child("prover"))
    accepted, details = RUNNERS[cfg.protocol](dist, cfg.params, profile, oracle, prover,
                                               root.child("verifier"))
    log.flush()
    rec = {"schema": RUN_SCHEMA, "protocol": cfg.protocol, "seed": cfg.seed, "run_id": run_id,
           "profile": profile.name, "accepted": bool(accepted), **_jsonable(details),
           "stats": oracle.stats.as_dict(), "ledger": oracle.ledger.totals().as_dict(),
           "config": cfg.to_json()}
    return rec


def _worker(args):
    cfg, run_id, tpath = args
    return run_one(cfg, run_id, tpath)


def summarize(records: list[dict], protocol: str) -> ExperimentReport:
    R = len(records)
    acc = sum(1 for r in records if r["accepted"])
    ci = binomtest(acc, R).proportion_ci(0.95, method="wilson")
    mean = {k: float(np.mean([r["stats"][k] for r in records])) for k in STAT_FIELDS}
    mx = {k: int(max(r["stats"][k] for r in records)) for k in STAT_FIELDS}
    return ExperimentReport(protocol, R, acc, R - acc, acc / R, float(ci.low), float(ci.high), mean, mx)


def report_csv(rep: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = ["schema", "protocol", "runs", "accepts", "rejects", "accept_rate", "ci_low", "ci_high"]
    cols += [f"mean_{k}" for k in STAT_FIELDS] + [f"max_{k}" for k in STAT_FIELDS]
    w.writerow(cols)
    w.writerow([SUMMARY_SCHEMA, rep.protocol, rep.runs, rep.accepts, rep.rejects, repr(rep.accept_rate),
                repr(rep.ci_low), repr(rep.ci_high)]
               + [repr(rep.stats_mean[k]) for k in STAT_FIELDS] + [rep.stats_max[k] for k in STAT_FIELDS])
    return buf.getvalue()


def run_experiment(config: ExperimentConfig | dict, jobs: int = 1, out: str | None = None):
    """Run ``config.runs`` independent runs; returns ``(report, records)``.

    Records come back in run-id order whatever the completion order.  With
    ``out`` set, writes ``runs.jsonl`` (header line first) and ``summary.csv``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else ExperimentConfig.from_json(config)
    _fixture(cfg.fixture)  # surface fixture errors before any run
    out = out or cfg.out
    tpath = None
    if out:
        os.makedirs(out, exist_ok=True)
        if os.environ.get("PCV_LOG_TRANSCRIPTS", "0") == "1":
            tpath = os.path.join(out, "transcripts.jsonl")
            open(tpath, "w").close()
    tasks = [(cfg.to_json(), i, tpath) for i in range(int(cfg.runs))]
    if jobs > 1 and tpath is None:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_worker, tasks, chunksize=max(1, len(tasks) // (4 * jobs))))
    else:
        records = [_worker(t) for t in tasks]
    rep = summarize(records, cfg.protocol)
    if out:
        with open(os.path.join(out, "runs.jsonl"), "w") as fh:
            fh.write(json.dumps({"schema": RUN_SCHEMA, "header": True, "config": cfg.to_json()}) + "\n")
            for r in records:
                fh.write(json.dumps(r, sort_keys=True) + "\n")
        with open(os.path.join(out, "summary.csv"), "w") as fh:
            fh.write(report_csv(rep))
    return rep, records


def read_records(path: str) -> list[dict]:
    with open(path) as fh:
        rows = [json.loads(line) for line in fh if line.strip()]
    return [r for r in rows if not r.get("header")]


def replay(record: dict) -> tuple[dict, bool]:
    """Re-execute the run a record came from; returns the new record and
    whether it matches the original exactly."""
    new = run_one(record["config"], int(record["run_id"]))
    same = json.dumps(new, sort_keys=True) == json.dumps(record, sort_keys=True)
    return new, same
