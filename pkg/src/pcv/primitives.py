"""Verifier building blocks: ratio comparison, support membership,
neighbourhood mass estimation and neighbourhood sampling."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidParameter, ProtocolReject
from .oracles import draw_samples
from .profiles import PAPER, Profile
from .rng import RngStream

HIGH = "High"
LOW = "Low"
ESTIMATE = "Estimate"

# codes used by the vectorised comparison
CODE_LOW, CODE_EST, CODE_HIGH = -1, 0, 1

CHUNK = 1 << 20
MAX_SAMPLER_CAP = 50_000_000


@dataclass(frozen=True)
class CompareOutcome:
    kind: str
    alpha: float | None = None

    def __post_init__(self):
        if self.kind == ESTIMATE and not (self.alpha is not None and self.alpha > 0):
            raise InvalidParameter("an estimate must be positive")

    def to_json(self):
        return {"kind": self.kind, "alpha": self.alpha}


def compare_queries(gamma: float, beta: float, K: float = 2.0, profile: Profile = PAPER) -> int:
    """Number of PCond queries one comparison makes."""
    if not (0 < gamma <= 1 and 0 < beta <= 1 and K >= 1):
        raise InvalidParameter(f"bad compare parameters gamma={gamma} beta={beta} K={K}")
    raw = 2.0 * (K + 1) ** 4 * math.log(2.0 / beta) / gamma ** 2
    return profile.count("compare_queries", raw)


def _classify(counts: np.ndarray, q: int, gamma: float, K: float):
    p_hat = counts / q
    slack = gamma / (2.0 * (K + 1) ** 2)
    code = np.full(p_hat.shape, CODE_EST, dtype=np.int64)
    code[(p_hat > K / (K + 1) + slack) | (counts == q)] = CODE_HIGH
    code[(p_hat < 1.0 / (K + 1) - slack) | (counts == 0)] = CODE_LOW
    with np.errstate(divide="ignore", invalid="ignore"):
        est = np.where(code == CODE_EST, p_hat / (1.0 - p_hat), np.nan)
    return code, est


def compare_many(oracle, xs, ys, gamma, beta, K=2.0, profile: Profile = PAPER, label="compare"):
    """Vectorised :func:`compare` over pairs ``(xs[i], ys[i])``.

    Returns ``(codes, estimates)``: codes are CODE_LOW / CODE_EST / CODE_HIGH
    and estimates hold the ratio estimate where the code is CODE_EST.
    Identical pairs are answered with ratio 1 without any query.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
    ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
    q = compare_queries(gamma, beta, K, profile)
    codes = np.full(xs.shape, CODE_EST, dtype=np.int64)
    est = np.ones(xs.shape, dtype=np.float64)
    distinct = xs != ys
    k = int(distinct.sum())
    if k:
        counts = oracle.pcond_counts(xs[distinct], ys[distinct], q)
        oracle.ledger.add(label, queries=q * k)
        c, e = _classify(counts, q, gamma, K)
        codes[distinct] = c
        est[distinct] = e
    return codes, est


def compare(oracle, x: int, y: int, gamma: float, beta: float, K: float = 2.0,
            profile: Profile = PAPER) -> CompareOutcome:
    """Estimate ``D[x] / D[y]`` from pair queries.

    High means the ratio is (likely) above K and Low that it is below 1/K;
    otherwise the estimate is within ``gamma`` of the ratio except with
    probability ``beta``.
    """
    codes, est = compare_many(oracle, [x], [y], gamma, beta, K, profile)
    if codes[0] == CODE_HIGH:
        return CompareOutcome(HIGH)
    if codes[0] == CODE_LOW:
        return CompareOutcome(LOW)
    return CompareOutcome(ESTIMATE, float(est[0]))


def isinsupport_queries(beta: float, profile: Profile = PAPER) -> int:
    if not (0 < beta < 1):
        raise InvalidParameter(f"beta must lie in (0, 1), got {beta}")
    return profile.count("isinsupport_queries", math.log(1.0 / beta) / math.log(1.5))


def is_in_support_many(oracle, x_refs, ys, beta: float, profile: Profile = PAPER,
                       label="isinsupport") -> np.ndarray:
    """Membership check for every pair; True means Yes."""
    T = isinsupport_queries(beta, profile)
    hit, used = oracle.pcond_first_hits(x_refs, ys, T)
    oracle.ledger.add(label, queries=int(used.sum()))
    return hit


def is_in_support(oracle, x_ref: int, y: int, beta: float, profile: Profile = PAPER) -> bool:
    """Yes as soon as a pair query returns ``y``, No after the budget runs out.

    An element outside the support is never reported as inside, provided
    ``x_ref`` itself has positive mass.
    """
    return bool(is_in_support_many(oracle, [x_ref], [y], beta, profile)[0])


# ------------------------------------------------------------------ neighbourhoods

@dataclass(frozen=True)
class NeighborhoodEstimate:
    w_hat: float
    t: int
    alpha_t: float
    T: int
    m: int = 0
    kappa: float = 0.0

    @property
    def gamma(self) -> float:
        """Comparison accuracy that keeps misclassification inside the moat."""
        return self.kappa / (8.0 * self.T)

    def to_json(self):
        return {"w_hat": self.w_hat, "t": self.t, "alpha_t": self.alpha_t, "T": self.T, "m": self.m}


def ring_count(eta, beta, delta, profile: Profile = PAPER) -> int:
    return profile.count("en_T", 128.0 / (eta * beta * delta))


def inside_mask(codes, est, alpha, gamma):
    lo = 1.0 / (1.0 + alpha) - gamma
    hi = 1.0 + alpha + gamma
    return (codes == CODE_EST) & (est >= lo) & (est <= hi)


def estimate_neighborhood(oracle, x: int, kappa: float, beta: float, eta: float, delta: float,
                          rng: RngStream, profile: Profile = PAPER) -> NeighborhoodEstimate:
    """Estimate the mass of a randomly widened neighbourhood of ``x``.

    A radius ``alpha_t`` is drawn uniformly from ``T`` evenly spaced values in
    ``[kappa, 2 kappa)``; ``w_hat`` is the fraction of fresh samples whose
    mass ratio to ``x`` falls within that radius.
    """
    for name, v in (("kappa", kappa), ("beta", beta), ("eta", eta), ("delta", delta)):
        if not (0 < v <= 0.5):
            raise InvalidParameter(f"{name} must lie in (0, 1/2], got {v}")
    T = ring_count(eta, beta, delta, profile)
    t = int(rng.integers(1, T + 1))
    alpha = kappa + (t - 1) * kappa / T
    m = profile.count("en_samples", 48.0 * math.log(8.0 / delta) / (eta ** 2 * beta))
    gamma = kappa / (8.0 * T)
    fail = delta / (4.0 * m)
    inside = 0
    done = 0
    while done < m:
        k = min(CHUNK, m - done)
        zs = draw_samples(oracle, k, "en_samples")
        codes, est = compare_many(oracle, zs, np.full(k, x), gamma, fail, 2.0, profile, "en_compare")
        inside += int(inside_mask(codes, est, alpha, gamma).sum())
        done += k
    return NeighborhoodEstimate(inside / m, t, alpha, T, m, kappa)


class NeighborhoodSampler:
    """Draws from D restricted to the estimated neighbourhood of ``x``.

    Each attempt classifies up to ``cap`` fresh samples and returns the first
    one classified inside; an attempt that finds none yields bottom.  More
    than ``retries`` consecutive bottoms abort the protocol with Reject.
    """

    def __init__(self, oracle, estimate: NeighborhoodEstimate, x: int, kappa: float, beta: float,
                 eta: float, profile: Profile = PAPER):
        self.oracle = oracle
        self.x = int(x)
        self.alpha = estimate.alpha_t
        self.gamma = kappa / (8.0 * estimate.T)
        self.profile = profile
        self.delta_prime = profile.c_sample * eta * math.log(1.0 / eta)
        raw_cap = math.log(3.0 / self.delta_prime) / -math.log1p(-beta)
        self.cap = profile.count("sampler_cap", raw_cap)
        if self.cap > MAX_SAMPLER_CAP:
            raise InvalidParameter(f"sampler cap {self.cap} exceeds {MAX_SAMPLER_CAP}; "
                                   "use a profile that caps sampler_cap")
        self.fail = self.delta_prime / (3.0 * self.cap)
        self.q = compare_queries(self.gamma, self.fail, 2.0, profile)
        self.retries = profile.sampler_retries
        self.bottoms = 0
        self.attempts = 0

    def _classify(self, zs):
        (codes, est), q_each = compare_many_uncharged(self.oracle, zs, self.x, self.q, self.gamma)
        return inside_mask(codes, est, self.alpha, self.gamma), q_each

    def attempt_many(self, want: int):
        """Run ``want`` attempts; entries are elements or -1 for bottom."""
        out = np.empty(0, dtype=np.int64)
        while out.shape[0] < want:
            need = want - out.shape[0]
            # a chunk always holds at least one complete attempt
            size = max(self.cap, min(CHUNK, max(64, 4 * need)))
            zs = self.oracle.samp_many(size, charge=False)
            inside, q_each = self._classify(zs)
            picks, used = kernels.sampler_segments(inside, self.cap, need)
            self._charge(used, int(q_each[:used].sum()))
            res = np.where(picks >= 0, zs[np.maximum(picks, 0)], -1)
            out = np.concatenate((out, res))
        self.attempts += want
        return out

    def _charge(self, samples, queries):
        st = self.oracle.stats
        st.samples_drawn += samples
        st.pcond_queries += queries
        self.oracle.ledger.add("sampler", samples=samples, queries=queries)

    def draw_many(self, k: int) -> np.ndarray:
        """``k`` neighbourhood samples, retrying bottoms within the budget."""
        got = []
        run = 0
        while len(got) < k:
            res = self.attempt_many(k - len(got))
            for v in res:
                if v < 0:
                    self.bottoms += 1
                    run += 1
                    if run > self.retries:
                        raise ProtocolReject("sampler-exhausted")
                else:
                    run = 0
                    got.append(int(v))
        return np.asarray(got, dtype=np.int64)

    def draw(self) -> int:
        return int(self.draw_many(1)[0])


def compare_many_uncharged(oracle, zs, x, q, gamma, K=2.0):
    """Compare every ``z`` against ``x`` without touching the counters.

    Also returns the per-element query cost so the caller can charge only
    the comparisons it ends up using.
    """
    zs = np.asarray(zs, dtype=np.int64)
    codes = np.full(zs.shape, CODE_EST, dtype=np.int64)
    est = np.ones(zs.shape, dtype=np.float64)
    q_each = np.where(zs != x, q, 0).astype(np.int64)
    distinct = zs != x
    if distinct.any():
        counts = oracle.pcond_counts(zs[distinct], np.full(int(distinct.sum()), x), q, charge=False)
        c, e = _classify(counts, q, gamma, K)
        codes[distinct] = c
        est[distinct] = e
    return (codes, est), q_each


def sample_from_neighborhood(oracle, estimate: NeighborhoodEstimate, x: int, kappa: float,
                             beta: float, eta: float, profile: Profile = PAPER):
    """One sampler attempt: an element of the neighbourhood, or None."""
    v = int(NeighborhoodSampler(oracle, estimate, x, kappa, beta, eta, profile).attempt_many(1)[0])
    return None if v < 0 else v


class NeighborhoodOracle:
    """Oracle view of D restricted to a neighbourhood of ``x``.

    Samples come from :class:`NeighborhoodSampler`.  Pair queries first
    decide, once per element, whether it belongs to the neighbourhood (by a
    comparison against ``x``); elements outside are treated as mass zero.
    """

    records_own_samples = True

    def __init__(self, base, sampler: NeighborhoodSampler):
        self.base = base
        self.sampler = sampler
        self.n = base.n
        self.stats = base.stats
        self.ledger = base.ledger
        self.log = base.log
        self._member: dict[int, bool] = {}

    def phase(self, name):
        return self.base.phase(name)

    def samp(self) -> int:
        return self.sampler.draw()

    def samp_many(self, k: int, charge: bool = True) -> np.ndarray:
        return self.sampler.draw_many(k)

    def members(self, elems) -> np.ndarray:
        elems = np.atleast_1d(np.asarray(elems, dtype=np.int64))
        todo = np.unique([e for e in elems.tolist() if e not in self._member]).astype(np.int64)
        if todo.size:
            s = self.sampler
            (codes, est), q_each = compare_many_uncharged(self.base, todo, s.x, s.q, s.gamma)
            queries = int(q_each.sum())
            self.stats.pcond_queries += queries
            self.ledger.add("membership", queries=queries)
            flags = inside_mask(codes, est, s.alpha, s.gamma)
            for e, f in zip(todo.tolist(), flags.tolist()):
                self._member[e] = f
        return np.array([self._member[e] for e in elems.tolist()], dtype=bool)

    def pcond_counts(self, xs, ys, q: int, charge: bool = True) -> np.ndarray:
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
        mx, my = self.members(xs), self.members(ys)
        if np.any(~mx & ~my):
            raise ProtocolReject("pcond-fail")
        out = np.where(mx, q, 0).astype(np.int64)
        both = mx & my
        if both.any():
            out[both] = self.base.pcond_counts(xs[both], ys[both], q, charge)
        # a pair with one non-member is answered from membership alone; it
        # still counts as the q queries the caller issued
        if charge:
            self.stats.pcond_queries += q * int((~both).sum())
        return out

    def pcond_first_hits(self, xs, ys, T: int):
        xs = np.atleast_1d(np.asarray(xs, dtype=np.int64))
        ys = np.atleast_1d(np.asarray(ys, dtype=np.int64))
        mx, my = self.members(xs), self.members(ys)
        if np.any(~mx & ~my):
            raise ProtocolReject("pcond-fail")
        hit = np.zeros(xs.shape, dtype=bool)
        used = np.full(xs.shape, T, dtype=np.int64)
        only_y = ~mx & my
        hit[only_y] = True
        used[only_y] = 1
        both = mx & my
        if both.any():
            h, u = self.base.pcond_first_hits(xs[both], ys[both], T)
            hit[both] = h
            used[both] = u
        # pairs answered from membership alone count as the queries issued
        local = ~both
        self.stats.pcond_queries += int(used[local].sum())
        return hit, used
