"""Instrumented Samp/PCond access to a hidden distribution."""
from __future__ import annotations

import json
import math
import os
from contextlib import contextmanager
from dataclasses import asdict, dataclass

import numpy as np

from . import kernels
from .distributions import Distribution
from .errors import InvalidParameter, ProtocolReject
from .rng import RngStream

FAIL = -1
"""Value returned by :meth:`InstrumentedOracle.pcond` when the pair has zero mass."""

# numpy's binomial sampler takes a signed 64-bit trial count
MAX_BATCH_QUERIES = (1 << 63) - 1


def element_bits(n: int) -> int:
    return max(1, math.ceil(math.log2(n)))


def tag_bits(L: int) -> int:
    return max(1, math.ceil(math.log2(L + 1)))


def index_bits(width: int) -> int:
    """Bits for an index into ``width`` slots."""
    return max(1, math.ceil(math.log2(width)))


@dataclass
class OracleStats:
    samples_drawn: int = 0
    pcond_queries: int = 0
    bits_sent_to_prover: int = 0
    bits_sent_to_verifier: int = 0
    rounds: int = 0

    def to_prover(self, bits: int):
        self.bits_sent_to_prover += int(bits)

    def to_verifier(self, bits: int):
        self.bits_sent_to_verifier += int(bits)

    def add_rounds(self, k: int = 1):
        self.rounds += int(k)

    def as_dict(self) -> dict:
        return asdict(self)

    def snapshot(self) -> OracleStats:
        return OracleStats(**asdict(self))

    def minus(self, earlier: OracleStats) -> OracleStats:
        return OracleStats(**{k: v - getattr(earlier, k) for k, v in asdict(self).items()})

    def __iadd__(self, other: OracleStats):
        for k, v in asdict(other).items():
            setattr(self, k, getattr(self, k) + v)
        return self


@dataclass
class CostLedger:
    """Costs a protocol predicts for itself from its own parameters.

    Protocol code adds one entry per batch of identical calls; the totals
    must agree with the counters the oracle keeps independently.
    """

    entries: list = None

    def __post_init__(self):
        if self.entries is None:
            self.entries = []

    def add(self, label: str, samples: int = 0, queries: int = 0, to_prover: int = 0,
            to_verifier: int = 0, rounds: int = 0):
        self.entries.append((label, int(samples), int(queries), int(to_prover),
                             int(to_verifier), int(rounds)))

    def totals(self) -> OracleStats:
        t = OracleStats()
        for _, s, q, bp, bv, r in self.entries:
            t.samples_drawn += s
            t.pcond_queries += q
            t.bits_sent_to_prover += bp
            t.bits_sent_to_verifier += bv
            t.rounds += r
        return t

    def by_label(self) -> dict:
        out: dict = {}
        for label, *vals in self.entries:
            acc = out.setdefault(label, [0] * 5)
            for i, v in enumerate(vals):
                acc[i] += v
        return out


class TranscriptLog:
    """Collects one JSON record per oracle call when enabled."""

    def __init__(self, run_id=None, enabled: bool | None = None, path: str | None = None):
        if enabled is None:
            enabled = os.environ.get("PCV_LOG_TRANSCRIPTS", "0") == "1"
        self.enabled = enabled
        self.run_id = run_id
        self.phase = "main"
        self.records: list[dict] = []
        self.path = path

    def log(self, op: str, args: dict, result):
        if self.enabled:
            self.records.append({"run_id": self.run_id, "phase": self.phase, "op": op,
                                 "args": _jsonable(args), "result": _jsonable(result)})

    def flush(self):
        if self.enabled and self.path and self.records:
            with open(self.path, "a") as fh:
                for rec in self.records:
                    fh.write(json.dumps(rec) + "\n")
            self.records.clear()


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


class InstrumentedOracle:
    """Samp and PCond access to a distribution the caller cannot read.

    The distribution lives in a private slot; verifier code only sees the
    domain size, the counters and the query methods.  Bulk methods draw
    several independent answers at once and are distributed exactly as the
    corresponding sequence of single calls.
    """

    def __init__(self, dist: Distribution, rng: RngStream, stats: OracleStats | None = None,
                 log: TranscriptLog | None = None):
        self._dist = dist
        self._rng = rng.gen
        self.n = dist.n
        self.stats = stats if stats is not None else OracleStats()
        self.ledger = CostLedger()
        self.log = log if log is not None else TranscriptLog(enabled=False)

    @contextmanager
    def phase(self, name: str):
        prev = self.log.phase
        self.log.phase = name
        try:
            yield
        finally:
            self.log.phase = prev

    # -------------------------------------------------------------- Samp
    def samp(self) -> int:
        return int(self.samp_many(1)[0])

    def samp_many(self, k: int, charge: bool = True) -> np.ndarray:
        """``k`` independent samples.

        With ``charge=False`` the caller takes over accounting and must
        charge the samples it actually consumes.
        """
        k = int(k)
        prob, alias = self._dist.alias_table()
        out = kernels.alias_sample(prob, alias, self._rng.random(k))
        if charge:
            self.stats.samples_drawn += k
        self.log.log("samp", {"k": k}, out)
        return out

    # -------------------------------------------------------------- PCond
    def _pair_prob(self, x, y):
        """P[x is returned] for pair queries, and a mask of zero-mass pairs."""
        p = self._dist.probs
        px = p[x]
        py = p[y]
        tot = px + py
        fail = tot <= 0
        with np.errstate(invalid="ignore", divide="ignore"):
            share = np.where(fail, 0.0, px / np.where(fail, 1.0, tot))
        # identical elements: the singleton conditional returns x itself
        share = np.where(np.asarray(x) == np.asarray(y), 1.0, share)
        return share, fail

    def pcond(self, x: int, y: int) -> int:
        self.stats.pcond_queries += 1
        share, fail = self._pair_prob(int(x), int(y))
        if fail:
            out = FAIL
        else:
            out = int(x) if self._rng.random() < share else int(y)
        self.log.log("pcond", {"x": int(x), "y": int(y)}, out)
        return out

    def pcond_counts(self, xs, ys, q: int, charge: bool = True) -> np.ndarray:
        """For each pair, how many of ``q`` PCond({x, y}) queries returned x.

        Raises :class:`ProtocolReject` if any pair has zero total mass.
        """
        q = int(q)
        if q > MAX_BATCH_QUERIES:
            raise InvalidParameter(f"query batch of {q} exceeds the 64-bit binomial range")
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
        share, fail = self._pair_prob(xs, ys)
        if np.any(fail):
            # earlier pairs ran in full; the failing pair stops at its first answer
            self.stats.pcond_queries += q * int(np.argmax(fail)) + 1
            raise ProtocolReject("pcond-fail")
        counts = self._rng.binomial(q, share)
        if charge:
            self.stats.pcond_queries += q * xs.shape[0]
        self.log.log("pcond_counts", {"xs": xs, "ys": ys, "q": q}, counts)
        return counts

    def pcond_first_hits(self, xs, ys, T: int):
        """Repeat PCond({x, y}) until y is returned, at most ``T`` times.

        Returns ``(hit, used)``: whether y came back and how many queries
        were spent on each pair.
        """
        T = int(T)
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
        share_x, fail = self._pair_prob(xs, ys)
        if np.any(fail):
            self.stats.pcond_queries += 1
            raise ProtocolReject("pcond-fail")
        share_y = np.where(xs == ys, 1.0, 1.0 - share_x)
        wait = np.full(xs.shape[0], T + 1, dtype=np.int64)
        live = share_y > 0
        if np.any(live):
            wait[live] = np.minimum(self._rng.geometric(share_y[live]), T + 1)
        hit = wait <= T
        used = np.minimum(wait, T)
        self.stats.pcond_queries += int(used.sum())
        self.log.log("pcond_first_hits", {"xs": xs, "ys": ys, "T": T}, used)
        return hit, used


def draw_samples(oracle, k: int, label: str) -> np.ndarray:
    """Draw ``k`` samples and record them in the oracle's cost ledger.

    Oracles whose samples are themselves built from raw draws (the
    neighbourhood view) record their raw consumption on their own.
    """
    out = oracle.samp_many(k)
    if not getattr(oracle, "records_own_samples", False):
        oracle.ledger.add(label, samples=k)
    return out


def pcond_sim(sample_multiset, z1: int, z2: int, rng: RngStream):
    """Answer a pair query using only previously drawn samples.

    Returns None (the bottom symbol) when neither element was sampled, a fair
    coin between the two when both were, and otherwise the sampled one.
    """
    seen = sample_multiset if isinstance(sample_multiset, (set, frozenset, dict)) else set(sample_multiset)
    in1 = z1 in seen
    in2 = z2 in seen
    if not in1 and not in2:
        return None
    if in1 and in2:
        return z1 if rng.random() < 0.5 else z2
    return z1 if in1 else z2
