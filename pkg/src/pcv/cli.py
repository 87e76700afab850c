"""Command line entry point: ``pcv <subcommand> ...``."""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .distributions import Bucketing, approx_histogram
from .errors import InvalidParameter
from .fixtures import GENERATORS, generate_fixture, load_fixture, save_fixture
from .harness import PROTOCOLS, ExperimentConfig, read_records, replay, report_csv, run_experiment
from .lowerbound import lower_bound_experiment

# runnable out of the box with `pcv subprotocol <name>`
DEFAULT_CONFIGS = {
    "compare": {"fixture": {"name": "two_level", "params": {"n": 100, "sizes": [10, 10], "ratio": 2.0,
                                                            "shuffle": False}},
                "params": {"x": 10, "y": 0, "gamma": 0.05, "beta": 0.05, "K": 2.0}},
    "isinsupport": {"fixture": {"name": "flat", "params": {"n": 1000, "support": 50}},
                    "params": {"beta": 0.1}},
    "estimate-neighborhood": {"fixture": {"name": "flat", "params": {"n": 1000, "support": 50}},
                              "params": {"kappa": 0.1, "beta": 0.1, "eta": 0.1, "delta": 0.1}},
    "sampler": {"fixture": {"name": "flat", "params": {"n": 1000, "support": 50}},
                "params": {"kappa": 0.1, "beta": 0.1, "eta": 0.1, "delta": 0.1}},
    "test1": {"fixture": {"name": "flat", "params": {"n": 10000, "support": 110}},
              "params": {"claim": [20, 100, 122, 412]}},
    "test2": {"fixture": {"name": "flat", "params": {"n": 10000, "support": 110}},
              "params": {"claim": [20, 100, 122, 412]}},
    "support-small": {"fixture": {"name": "flat", "params": {"n": 10000, "support": 40}},
                      "params": {"claim": [20, 40, 50, 100], "alpha": 0.0, "delta_c": 0.1, "delta_s": 0.1}},
    "support-large": {"fixture": {"name": "flat", "params": {"n": 10000, "support": 110}},
                      "params": {"claim": [20, 100, 122, 412], "alpha": 0.0, "delta": 0.1,
                                 "early_stop": True}},
    "approx-single": {"fixture": {"name": "flat", "params": {"n": 10000, "support": 70}},
                      "params": {"tau": 0.2, "delta_prime": 0.1}},
    "histogram": {"fixture": {"name": "flat", "params": {"n": 10000, "support": 64}},
                  "params": {"tau_prime": 0.1}},
}


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _load_config(args, protocol=None) -> dict:
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
    elif protocol is not None:
        cfg = json.loads(json.dumps(DEFAULT_CONFIGS[protocol]))
    else:
        raise InvalidParameter("run needs --config")
    if protocol is not None:
        cfg["protocol"] = protocol
    for item in args.set or []:
        key, _, val = item.partition("=")
        cfg.setdefault("params", {})[key] = _parse_value(val)
    if args.prover:
        cfg["prover"] = _parse_value(args.prover)
        if isinstance(cfg["prover"], str):
            cfg["prover"] = {"kind": cfg["prover"]}
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.runs is not None:
        cfg["runs"] = args.runs
    if args.profile == "custom":
        if not isinstance(cfg.get("profile"), dict):
            raise InvalidParameter("--profile custom needs a profile object in the config file")
    elif args.profile:
        cfg["profile"] = args.profile
    cfg.pop("out", None)
    return cfg


def _add_run_flags(p):
    p.add_argument("--config", help="experiment config (JSON)")
    p.add_argument("--seed", type=int, help="base seed (u64)")
    p.add_argument("--runs", type=int, help="number of independent runs")
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="output directory for runs.jsonl and summary.csv")
    p.add_argument("--profile", choices=["paper", "relaxed-default", "custom"])
    p.add_argument("--prover", help='adversary, e.g. Slide or \'{"kind": "Slide", "offset": 3}\'')
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a protocol parameter")


def _cmd_run(args, protocol=None):
    cfg = _load_config(args, protocol)
    rep, _ = run_experiment(ExperimentConfig.from_json(cfg), jobs=args.jobs, out=args.out)
    sys.stdout.write(report_csv(rep))
    return 0


def _cmd_lowerbound(args):
    res = lower_bound_experiment(args.n, args.m, args.k if args.k is not None else args.m, args.trials,
                                 args.seed or 0, args.K, args.c_prime)
    print(json.dumps(res.to_json()))
    return 0 if res.within_bound else 1


def _cmd_replay(args):
    if args.record.endswith(".jsonl"):
        records = read_records(args.record)
        if args.run_id is None:
            raise InvalidParameter("replaying from a .jsonl file needs --run-id")
        rec = next((r for r in records if r["run_id"] == args.run_id), None)
        if rec is None:
            raise InvalidParameter(f"run {args.run_id} not in {args.record}")
    else:
        with open(args.record) as fh:
            rec = json.load(fh)
    new, same = replay(rec)
    print(json.dumps({"run_id": rec["run_id"], "seed": rec["seed"], "identical": same,
                      "accepted": new["accepted"]}))
    return 0 if same else 1


def _cmd_fixtures(args):
    if args.action == "generate":
        params = {"n": args.n}
        for item in args.param or []:
            key, _, val = item.partition("=")
            params[key] = _parse_value(val)
        dist = generate_fixture(args.name, params, args.seed or 0)
        if args.out:
            save_fixture(dist, args.out)
        else:
            print(json.dumps(dist.to_json()))
        return 0
    dist = load_fixture({"path": args.name})
    p = dist.probs[dist.probs > 0]
    info = {"n": dist.n, "support": dist.support_size, "max": float(p.max()), "min": float(p.min()),
            "max_over_min": float(p.max() / p.min())}
    if args.tau:
        h = approx_histogram(dist, Bucketing(dist.n, args.tau))
        info["histogram"] = h.to_json()["masses"]
    print(json.dumps(info))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pcv", description="Simulate interactive verification of "
                                 "distribution properties under pair-conditional sampling.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run any protocol from a JSON config")
    _add_run_flags(p)

    p = sub.add_parser("subprotocol", help="run one protocol (built-in defaults unless --config)")
    p.add_argument("name", choices=PROTOCOLS)
    _add_run_flags(p)

    p = sub.add_parser("lowerbound", help="sample-simulation experiment on the hard flat instances")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True, help="pair queries per trial")
    p.add_argument("--k", type=int, help="samples per trial (default: m)")
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--K", type=float, default=2.0)
    p.add_argument("--c-prime", type=float, default=1.0 / 8.0)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("replay", help="re-execute a recorded run and compare")
    p.add_argument("record", help="record JSON file, or runs.jsonl with --run-id")
    p.add_argument("--run-id", type=int)

    p = sub.add_parser("fixtures", help="generate or inspect distribution fixtures")
    p.add_argument("action", choices=["generate", "inspect"])
    p.add_argument("name", help=f"generator ({', '.join(GENERATORS)}) or fixture path")
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--tau", type=float, help="also print the bucket histogram (inspect)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "subprotocol":
            return _cmd_run(args, args.name)
        if args.command == "lowerbound":
            return _cmd_lowerbound(args)
        if args.command == "replay":
            return _cmd_replay(args)
        return _cmd_fixtures(args)
    except InvalidParameter as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
