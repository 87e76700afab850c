"""Interactive verification of support-size claims for nearly flat distributions."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameter, ProtocolReject
from .oracles import draw_samples, element_bits, index_bits
from .outcomes import Outcome
from .primitives import is_in_support_many
from .profiles import PAPER, Profile
from .rng import RngStream

TUPLE_CELLS = 1 << 21  # tuple entries built per Test 2 batch


@dataclass(frozen=True)
class SupportClaim:
    """The claim ``A' < A <= |supp| <= B < B'``; bounds may be fractional."""

    a_lo_strict: float
    a_lo: float
    b_hi: float
    b_hi_strict: float

    def __post_init__(self):
        if not (0 <= self.a_lo_strict < self.a_lo <= self.b_hi < self.b_hi_strict):
            raise InvalidParameter(f"need A' < A <= B < B', got {self.as_tuple()}")

    def as_tuple(self):
        return (self.a_lo_strict, self.a_lo, self.b_hi, self.b_hi_strict)

    def check_domain(self, n: int):
        if self.b_hi_strict > n:
            raise InvalidParameter(f"B'={self.b_hi_strict} exceeds the domain size {n}")

    def to_json(self):
        return asdict(self)


@dataclass(frozen=True)
class RejectionProfile:
    """Single-run rejection bounds of a test and its amplification schedule.

    ``p_reject`` bounds the rejection probability when the claim is true,
    ``q_reject`` is the minimum rejection probability when it is false.
    """

    p_reject: float
    q_reject: float
    delta_gap: float
    trials_T: int
    threshold: float
    c: float
    s: int

    def __post_init__(self):
        if not self.q_reject > self.p_reject:
            raise InvalidParameter(f"q_reject={self.q_reject} must exceed p_reject={self.p_reject}")

    def rejects(self, rejections: int) -> bool:
        return rejections >= self.threshold * self.trials_T

    def to_json(self):
        return asdict(self)


def amplification_trials(gap: float, delta: float, key: str, profile: Profile) -> int:
    return profile.count(key, 2.0 * math.log(2.0 / delta) / gap ** 2)


def test1_parameters(A, A_strict, n=None):
    """``(c, s, beta, c_eff)``; ``c_eff = s A / n`` accounts for rounding ``s`` up."""
    if not (0 < A_strict < A):
        raise InvalidParameter(f"need 0 < A' < A, got A'={A_strict}, A={A}")
    c = (A - A_strict) / (2.0 * A)
    beta = c * c * math.exp(-c)
    if n is None:
        return c, None, beta, c
    s = math.ceil(c * n / A - 1e-12)
    return c, s, beta, s * A / n


def test2_parameters(B, B_strict, n=None):
    """``(c, s, lam, c_eff)`` for Test 2."""
    if not (0 < B < B_strict):
        raise InvalidParameter(f"need 0 < B < B', got B={B}, B'={B_strict}")
    c = (B_strict - B) / (18.0 * B_strict)
    lam = B / B_strict
    if n is None:
        return c, None, lam, c
    s = math.ceil(c * n / B_strict - 1e-12)
    return c, s, lam, s * B_strict / n


def _check_delta(delta):
    if not (0 < delta < 1):
        raise InvalidParameter(f"delta must lie in (0, 1), got {delta}")


def rejection_profile_test1(A, A_strict, delta, n=None, profile: Profile = PAPER) -> RejectionProfile:
    _check_delta(delta)
    c, s, beta, ce = test1_parameters(A, A_strict, n)
    p = math.exp(-ce) + beta
    q = 1.0 - ce * (1.0 - 2.0 * c)
    gap = q - p
    if gap <= 0:
        raise InvalidParameter(f"Test 1 has no rejection gap at A={A}, A'={A_strict}")
    T = amplification_trials(gap, delta, "amp_T1", profile)
    return RejectionProfile(p, q, gap, T, p + gap / 2.0, c, s if s is not None else 0)


def rejection_profile_test2(B, B_strict, delta, n=None, profile: Profile = PAPER) -> RejectionProfile:
    _check_delta(delta)
    c, s, lam, ce = test2_parameters(B, B_strict, n)
    p = ce * lam / 2.0 + ce * ce * lam
    q = 0.5 * (1.0 - math.exp(-ce)) / (1.0 + 0.75 * (1.0 - lam) / lam)
    gap = q - p
    if gap <= 0:
        raise InvalidParameter(f"Test 2 has no rejection gap at B={B}, B'={B_strict}")
    T = amplification_trials(gap, delta, "amp_T2", profile)
    return RejectionProfile(p, q, gap, T, p + gap / 2.0, c, s if s is not None else 0)


# ------------------------------------------------------------------ Test 1

def test1_rejections(oracle, prover, x_ref: int, A, A_strict, runs: int, rng: RngStream,
                     profile: Profile = PAPER, context=None) -> np.ndarray:
    """Run Test 1 ``runs`` times; returns a boolean array, True = rejected.

    Raises :class:`ProtocolReject` if the prover answers with an element it
    was not offered.
    """
    n = oracle.n
    c, s, beta, _ = test1_parameters(A, A_strict, n)
    eb = element_bits(n)
    answer_bits = max(1, math.ceil(math.log2(n + 1)))
    Y = rng.integers(0, n, size=(runs, s))
    oracle.stats.to_prover(runs * s * eb)
    oracle.stats.to_verifier(runs * answer_bits)
    oracle.stats.add_rounds(runs)
    oracle.ledger.add("test1_messages", to_prover=runs * s * eb, to_verifier=runs * answer_bits,
                      rounds=runs)
    picks = np.asarray(prover.pick_in_support(Y, context), dtype=np.int64)
    failed = picks < 0
    offered = (Y == picks[:, None]).any(axis=1)
    if np.any(~failed & ~offered):
        raise ProtocolReject("test1-element-not-offered")
    rejected = failed.copy()
    live = ~failed
    if live.any():
        yes = is_in_support_many(oracle, np.full(int(live.sum()), x_ref), picks[live], beta, profile,
                                 "test1_isinsupport")
        rejected[live] = ~yes
    return rejected


def test1_large(oracle, prover, x_ref: int, A, A_strict, rng: RngStream,
                profile: Profile = PAPER, context=None) -> Outcome:
    """One round of Test 1: the prover must exhibit a support element among
    ``s`` uniform draws, confirmed by a membership check against ``x_ref``."""
    try:
        rej = test1_rejections(oracle, prover, x_ref, A, A_strict, 1, rng, profile, context)
    except ProtocolReject as e:
        return Outcome.reject(e.reason)
    return Outcome.reject("test1") if rej[0] else Outcome.accept()


# ------------------------------------------------------------------ Test 2

def build_planted_tuples(oracle, rows: int, s: int, rng: RngStream):
    """Tuples of ``s`` uniform elements with one sample of D at a random slot."""
    xs = draw_samples(oracle, rows, "test2_samples")
    tuples = rng.integers(0, oracle.n, size=(rows, s + 1))
    pos = rng.integers(0, s + 1, size=rows)
    r = np.arange(rows)
    # the uniform entries are exchangeable, so planting x at a uniform slot
    # gives the same law as permuting (x, z_1, ..., z_s) uniformly
    tuples[r, pos] = xs
    return tuples, pos


def test2_rejections(oracle, prover, B, B_strict, runs: int, rng: RngStream, context=None,
                     stop_at: int | None = None):
    """Run Test 2 up to ``runs`` times; returns ``(rejections, runs_done)``.

    With ``stop_at`` set, stops early once that many rejections occurred.
    """
    n = oracle.n
    _, s, _, _ = test2_parameters(B, B_strict, n)
    width = s + 1
    eb = element_bits(n)
    ib = index_bits(width)
    per_batch = max(1, TUPLE_CELLS // width)
    rejections = 0
    done = 0
    while done < runs:
        rows = min(per_batch, runs - done)
        tuples, pos = build_planted_tuples(oracle, rows, s, rng)
        oracle.stats.to_prover(rows * width * eb)
        oracle.stats.to_verifier(rows * ib)
        oracle.stats.add_rounds(rows)
        oracle.ledger.add("test2", to_prover=rows * width * eb,
                          to_verifier=rows * ib, rounds=rows)
        guess = np.asarray(prover.guess_planted_indices(tuples, context), dtype=np.int64)
        if np.any((guess < 0) | (guess >= width)):
            raise ProtocolReject("test2-index-out-of-range")
        rejections += int(np.count_nonzero(guess != pos))
        done += rows
        if stop_at is not None and rejections >= stop_at:
            break
    return rejections, done


def test2_large(oracle, prover, B, B_strict, rng: RngStream, context=None) -> Outcome:
    """One round of Test 2: the prover must spot which tuple entry was sampled from D."""
    try:
        r, _ = test2_rejections(oracle, prover, B, B_strict, 1, rng, context)
    except ProtocolReject as e:
        return Outcome.reject(e.reason)
    return Outcome.reject("test2") if r else Outcome.accept()


# ------------------------------------------------------------------ amplified protocols

def verify_support_large(oracle, prover, claim: SupportClaim, alpha: float, delta: float,
                         rng: RngStream, profile: Profile = PAPER, context=None,
                         early_stop: bool = False) -> Outcome:
    """Repeat both tests and threshold their rejection counts.

    Test 2 is skipped once Test 1 has rejected.  ``early_stop`` ends Test 2
    as soon as its rejection count crosses the threshold; the decision is
    unchanged but fewer resources are spent.
    """
    claim.check_domain(oracle.n)
    A_, A, B, B_ = claim.as_tuple()
    prof1 = rejection_profile_test1(A, A_, delta, oracle.n, profile)
    prof2 = rejection_profile_test2(B, B_, delta, oracle.n, profile)
    details = {"T1": prof1.trials_T, "T2": prof2.trials_T, "alpha": alpha}
    try:
        x_ref = int(draw_samples(oracle, 1, "reference_sample")[0])
        with oracle.phase("test1"):
            r1 = int(test1_rejections(oracle, prover, x_ref, A, A_, prof1.trials_T, rng.child("test1"),
                                      profile, context).sum())
        details["test1_rejections"] = r1
        if prof1.rejects(r1):
            return Outcome.reject("test1", **details)
        stop = math.ceil(prof2.threshold * prof2.trials_T) if early_stop else None
        with oracle.phase("test2"):
            r2, done = test2_rejections(oracle, prover, B, B_, prof2.trials_T, rng.child("test2"),
                                        context, stop)
        details.update(test2_rejections=r2, test2_runs=done)
        if prof2.rejects(r2):
            return Outcome.reject("test2", **details)
    except ProtocolReject as e:
        return Outcome.reject(e.reason, **details)
    return Outcome.accept(**details)


def small_sample_counts(claim: SupportClaim, alpha: float, delta_s: float, profile: Profile = PAPER):
    """``(s1, s2)`` of the small-support protocol."""
    A_, A, B, B_ = claim.as_tuple()
    if A_ <= 0:
        raise InvalidParameter("the small-support protocol needs A' > 0")
    slack = B_ / ((1.0 + alpha) * B)
    if slack <= 1:
        raise InvalidParameter(f"(1+alpha)B must stay below B' (alpha={alpha}, B={B}, B'={B_})")
    s1 = profile.count("small_s1", math.log(1.0 / delta_s) / math.log(A / A_))
    s2 = profile.count("small_s2", math.log(1.0 / delta_s) / math.log(slack))
    return s1, s2


def verify_support_small(oracle, prover, claim: SupportClaim, alpha: float, delta_c: float,
                         delta_s: float, rng: RngStream, profile: Profile = PAPER,
                         context=None) -> Outcome:
    """The prover lists the support; the verifier spot-checks the list both ways.

    Test 1 checks that random listed elements carry mass.  Test 2 checks
    that samples of D land in the list.
    """
    claim.check_domain(oracle.n)
    for name, v in (("delta_c", delta_c), ("delta_s", delta_s)):
        if not (0 < v < 1):
            raise InvalidParameter(f"{name} must lie in (0, 1), got {v}")
    s1, s2 = small_sample_counts(claim, alpha, delta_s, profile)
    details = {"s1": s1, "s2": s2, "alpha": alpha}
    n = oracle.n
    eb = element_bits(n)
    try:
        claimed = np.asarray(prover.claim_support(context), dtype=np.int64).ravel()
        size = claimed.shape[0]
        oracle.stats.to_verifier(size * eb)
        oracle.stats.add_rounds(1)
        oracle.ledger.add("support_list", to_verifier=size * eb, rounds=1)
        details["claimed_size"] = size
        _, A, B, _ = claim.as_tuple()
        if size < math.ceil(A - 1e-9) or size > math.floor(B + 1e-9):
            return Outcome.reject("support-list-size", **details)
        if np.any((claimed < 0) | (claimed >= n)) or np.unique(claimed).shape[0] != size:
            return Outcome.reject("support-list-malformed", **details)
        with oracle.phase("small_test1"):
            ys = claimed[rng.integers(0, size, size=s1)]
            refs = draw_samples(oracle, s1, "small_test1_refs")
            yes = is_in_support_many(oracle, refs, ys, delta_c / s1, profile, "small_isinsupport")
        if not yes.all():
            return Outcome.reject("small-test1", **details)
        with oracle.phase("small_test2"):
            xs = draw_samples(oracle, s2, "small_test2")
        if not np.isin(xs, claimed).all():
            return Outcome.reject("small-test2", **details)
    except ProtocolReject as e:
        return Outcome.reject(e.reason, **details)
    return Outcome.accept(**details)
