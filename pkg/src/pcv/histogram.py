"""Certifying single point masses and verifying a whole approximate histogram."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import ApproxHistogram, Bucketing, emd_histograms
from .errors import InvalidParameter, ProtocolReject
from .oracles import draw_samples, element_bits, index_bits, tag_bits
from .outcomes import Outcome
from .primitives import (CODE_EST, NeighborhoodOracle, NeighborhoodSampler, compare_many,
                         estimate_neighborhood)
from .profiles import PAPER, Profile
from .provers import SupportContext, find_heavy_representative  # noqa: F401  (re-export)
from .rng import RngStream
from .support_size import (SupportClaim, rejection_profile_test1, rejection_profile_test2,
                           verify_support_large, verify_support_small)


@dataclass(frozen=True)
class PointMassClaim:
    """The prover's claim that ``y_star`` sits in bucket ``j_star`` with a heavy neighbourhood."""

    y_star: int
    j_star: int
    claimed_mass: float
    claimed_neighborhood_mass_lb: float

    @classmethod
    def make(cls, y_star: int, j_star: int, bucketing: Bucketing) -> PointMassClaim:
        if not (0 <= j_star <= bucketing.L):
            raise InvalidParameter(f"tag {j_star} outside 0..{bucketing.L}")
        return cls(int(y_star), int(j_star), float(bucketing.position(j_star)),
                   bucketing.tau / (30.0 * bucketing.L))


def support_bounds(w_hat, eta, alpha, j_star, tau, n):
    """``(A', A, B, B')`` implied by a neighbourhood of mass ``w_hat`` around a
    point claimed to lie in bucket ``j_star``."""
    base = tau * (1.0 + tau) ** j_star / n
    shrink = (1.0 + eta) * (1.0 + alpha)
    return (w_hat / (base * (1.0 + tau) * shrink),
            w_hat / (base * shrink),
            w_hat * shrink * (1.0 + tau) / base,
            w_hat * shrink * (1.0 + tau) ** 2 / base)


def single_parameters(tau: float, L: int, delta_prime: float, profile: Profile = PAPER):
    """``(kappa, beta, eta)`` for certifying one point mass."""
    kappa = tau / 3.0
    beta = tau / (30.0 * L)
    s = math.ceil(math.log(2.0 / delta_prime) / math.log1p(tau))
    eta = tau / 10.0
    if s > 1:
        eta = min(eta, math.log(s) / (100.0 * s * delta_prime))
    eta = max(eta, profile.eta_floor * tau)
    return kappa, beta, eta


def choose_regime(claim: SupportClaim, n: int) -> str:
    cut = math.ceil(math.sqrt(n))
    if claim.b_hi <= cut:
        return "small"
    if claim.a_lo > cut:
        return "large"
    return "large" if claim.a_lo >= math.sqrt(n) else "small"


def approximate_single(oracle, prover, claim: PointMassClaim, tau: float, delta_prime: float,
                       rng: RngStream, profile: Profile = PAPER) -> Outcome:
    """Certify that ``claim.y_star`` has mass within one bucket of ``claim.j_star``.

    On Accept the details carry the certified mass ``tau (1+tau)^j_star / n``.
    """
    n = oracle.n
    bk = Bucketing(n, tau)
    if not (0 < delta_prime < 1):
        raise InvalidParameter(f"delta_prime must lie in (0, 1), got {delta_prime}")
    kappa, beta, eta = single_parameters(tau, bk.L, delta_prime, profile)
    y, j = claim.y_star, claim.j_star
    details = {"y_star": y, "j_star": j, "eta": eta}
    try:
        with oracle.phase("estimate_neighborhood"):
            est = estimate_neighborhood(oracle, y, kappa, beta, eta, delta_prime / 2.0,
                                        rng.child("en"), profile)
        details.update(w_hat=est.w_hat, t=est.t, alpha_t=est.alpha_t, T=est.T, m=est.m)
        if est.w_hat <= (1.0 + eta) * beta:
            return Outcome.reject("thin-neighborhood", **details)
        alpha = est.alpha_t
        A_, A, B, B_ = support_bounds(est.w_hat, eta, alpha, j, tau, n)
        details["bounds"] = [A_, A, B, B_]
        # the prover learns which radius was drawn
        oracle.stats.to_prover(index_bits(est.T))
        oracle.stats.add_rounds(1)
        oracle.ledger.add("radius_message", to_prover=index_bits(est.T), rounds=1)
        if A > n:
            return Outcome.reject("bounds-exceed-domain", **details)
        B_ = min(B_, float(n))
        if B >= B_:
            B = math.nextafter(B_, 0.0)
        sclaim = SupportClaim(A_, A, B, B_)
        regime = choose_regime(sclaim, n)
        details["regime"] = regime
        sampler = NeighborhoodSampler(oracle, est, y, kappa, beta, eta, profile)
        sub = NeighborhoodOracle(oracle, sampler)
        ctx = SupportContext(y, alpha, sclaim)
        half = delta_prime / 2.0
        if regime == "small":
            if B_ <= (1.0 + alpha) * B:
                return Outcome.reject("degenerate-support-parameters", **details)
            res = verify_support_small(sub, prover, sclaim, alpha, half, half, rng.child("small"),
                                       profile, ctx)
        else:
            try:
                rejection_profile_test1(A, A_, half, n, profile)
                rejection_profile_test2(B, B_, half, n, profile)
            except InvalidParameter:
                return Outcome.reject("degenerate-support-parameters", **details)
            res = verify_support_large(sub, prover, sclaim, alpha, half, rng.child("large"),
                                       profile, ctx)
        details["support"] = {"reason": res.reason, **res.details}
        details["sampler_bottoms"] = sampler.bottoms
        if not res.accepted:
            return Outcome.reject(res.reason, **details)
    except ProtocolReject as e:
        return Outcome.reject(e.reason, **details)
    return Outcome.accept(certified_mass=claim.claimed_mass, **details)


# ------------------------------------------------------------------ full histogram

@dataclass
class HistogramSession:
    """Derived parameters and the messages exchanged in one histogram run."""

    n: int
    tau_prime: float
    tau: float
    L: int
    s: int
    gamma: float
    relevant_threshold: float
    reject_threshold: float
    representatives: dict = field(default_factory=dict)
    tags: dict = field(default_factory=dict)

    @classmethod
    def create(cls, n: int, tau_prime: float, profile: Profile = PAPER, tau: float | None = None):
        if not (0 < tau_prime <= 0.1):
            raise InvalidParameter(f"tau_prime must lie in (0, 0.1], got {tau_prime}")
        tau = profile.tau_factor * tau_prime if tau is None else tau
        L = Bucketing(n, tau).L
        s = profile.count("hist_samples", 10.0 * L / tau * math.log(10.0 * L))
        thr = reject_threshold(tau_prime, tau)
        if thr <= 0:
            raise InvalidParameter(f"tau={tau} leaves no room below tau_prime={tau_prime}")
        return cls(n, tau_prime, tau, L, s, tau / (s * (1.0 + tau)), tau / (10.0 * L), thr)


def reject_threshold(tau_prime: float, tau: float) -> float:
    return 2.0 * tau_prime - (2.0 * tau + tau * tau) - tau / (1.0 + tau)


def verify_histogram(oracle, prover, tau_prime: float, rng: RngStream, profile: Profile = PAPER,
                     tau: float | None = None) -> Outcome:
    """Learn the bucket histogram of D from an untrusted prover.

    On Accept, ``details["histogram"]`` is the learned :class:`ApproxHistogram`.
    """
    n = oracle.n
    sess = HistogramSession.create(n, tau_prime, profile, tau)
    bk = Bucketing(n, sess.tau)
    eb, tb = element_bits(n), tag_bits(bk.L)
    details = {"tau": sess.tau, "s": sess.s, "gamma": sess.gamma,
               "reject_threshold": sess.reject_threshold}
    try:
        # step 1: relevant buckets and their representatives
        reps = [(int(j), int(y)) for j, y in prover.relevant_buckets(bk)]
        oracle.stats.to_verifier(len(reps) * (tb + eb))
        oracle.stats.add_rounds(1)
        oracle.ledger.add("representatives", to_verifier=len(reps) * (tb + eb), rounds=1)
        details["representatives"] = reps
        if not reps:
            return Outcome.reject("no-relevant-buckets", **details)
        tags_k = [j for j, _ in reps]
        if len(set(tags_k)) != len(tags_k):
            return Outcome.reject("duplicate-representative", **details)
        if any(not (0 <= j <= bk.L) or not (0 <= y < n) for j, y in reps):
            return Outcome.reject("malformed-representative", **details)
        sess.representatives = {j: y for j, y in reps}

        # step 2: certify every representative
        delta_prime = 1.0 / (20.0 * len(reps))
        singles = []
        for j, y in reps:
            res = approximate_single(oracle, prover, PointMassClaim.make(y, j, bk), sess.tau,
                                     delta_prime, rng.child(f"single:{j}"), profile)
            singles.append({"tag": j, "accepted": res.accepted, "reason": res.reason,
                            "w_hat": res.details.get("w_hat"), "regime": res.details.get("regime")})
            if not res.accepted:
                details["singles"] = singles
                return Outcome.reject(f"single:{res.reason}", **details)
        details["singles"] = singles

        # steps 3-5: sample, collect tags, form the empirical histogram
        with oracle.phase("histogram_samples"):
            S = draw_samples(oracle, sess.s, "histogram_samples")
        oracle.stats.to_prover(sess.s * eb)
        oracle.stats.to_verifier(sess.s * tb)
        oracle.stats.add_rounds(1)
        oracle.ledger.add("histogram_tags", to_prover=sess.s * eb, to_verifier=sess.s * tb, rounds=1)
        tags = np.asarray(prover.tag_samples(S, bk), dtype=np.int64)
        if tags.shape != S.shape:
            return Outcome.reject("malformed-tags", **details)
        counts = np.bincount(np.clip(tags, 0, bk.L), minlength=bk.L + 1)
        learned = counts / sess.s

        # step 6: consistency checks against the certified representatives
        known = np.zeros(bk.L + 1, dtype=bool)
        rep_of = np.full(bk.L + 1, -1, dtype=np.int64)
        for j, y in reps:
            known[j] = True
            rep_of[j] = y
        if np.any((tags < 0) | (tags > bk.L)) or not known[tags].all():
            return Outcome.reject("tag-outside-relevant-set", **details)
        ystar = rep_of[tags]
        with oracle.phase("histogram_compare"):
            codes, est = compare_many(oracle, S, ystar, sess.gamma, 1.0 / (20.0 * sess.s), 2.0,
                                      profile, "histogram_compare")
        if np.any(codes != CODE_EST):
            return Outcome.reject("compare-out-of-range", **details)
        claimed = bk.position(tags)
        total = math.fsum(np.abs(bk.position(tags) * est - claimed))
        details["consistency_sum"] = total
        if total >= sess.reject_threshold:
            return Outcome.reject("consistency-sum", **details)
    except ProtocolReject as e:
        return Outcome.reject(e.reason, **details)
    hist = ApproxHistogram(bk, learned)
    return Outcome.accept(histogram=hist, **details)


def bucket_distance(h1: ApproxHistogram, h2: ApproxHistogram) -> float:
    """Half the L1 distance between two bucket mass vectors."""
    if h1.bucketing != h2.bucketing:
        raise InvalidParameter("histograms use different bucketings")
    return 0.5 * math.fsum(np.abs(h1.masses - h2.masses))


# ------------------------------------------------------------------ label-invariant decisions

def decide_label_invariant(histogram: ApproxHistogram, property_distance, tau_c: float,
                           tau_f: float) -> Outcome:
    if not tau_c < tau_f:
        raise InvalidParameter(f"need tau_c < tau_f, got {tau_c} and {tau_f}")
    d = float(property_distance(histogram))
    mid = 0.5 * (tau_c + tau_f)
    return Outcome(d <= mid, None if d <= mid else "far-from-property", {"distance": d})


def implied_counts(h: ApproxHistogram) -> np.ndarray:
    bk = h.bucketing
    return h.masses / bk.position(np.arange(bk.L + 1))


def support_size_distance(lo: float, hi: float):
    """Distance to support sizes in ``[lo, hi]``.

    Too many elements: the mass of the lightest surplus elements, which
    would have to be merged away.  Too few: each missing element needs at
    least the bucket-0 value ``tau/n`` of mass.
    """
    if not (0 < lo <= hi):
        raise InvalidParameter("need 0 < lo <= hi")

    def dist(h: ApproxHistogram) -> float:
        counts = implied_counts(h)
        k = math.fsum(counts)
        bk = h.bucketing
        if k > hi:
            surplus = k - hi
            moved = 0.0
            for j in range(bk.L + 1):
                take = min(counts[j], surplus)
                moved += take * bk.position(j)
                surplus -= take
                if surplus <= 0:
                    break
            return moved
        if k < lo:
            return (lo - k) * bk.tau / bk.n
        return 0.0

    return dist


def uniformity_distance(h: ApproxHistogram) -> float:
    """Smallest transport distance (halved, in counts units) to a one-bucket histogram."""
    bk = h.bucketing
    pos = bk.position(np.arange(bk.L + 1))
    best = math.inf
    for b in np.flatnonzero(1.0 / pos <= bk.n):
        masses = np.zeros(bk.L + 1)
        masses[b] = 1.0
        best = min(best, 0.5 * emd_histograms(h, ApproxHistogram(bk, masses), "counts"))
    return best
