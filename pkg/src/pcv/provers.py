"""Provers: an honest one that knows D exactly, and adversarial strategies.

Every prover answers the same messages:

* ``relevant_buckets(bucketing)`` -> list of ``(tag, representative)``
* ``tag_samples(samples, bucketing)`` -> one bucket tag per sample
* ``claim_support(context)`` -> listed support set
* ``pick_in_support(Y, context)`` -> for each row of Y an element of that row, or -1
* ``guess_planted_indices(tuples, context)`` -> for each row the guessed planted slot

``context`` is None when the sub-protocol runs on D itself, or a
:class:`SupportContext` when it runs on D restricted to a neighbourhood.
Provers see only these messages and their own random stream.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .distributions import Bucketing, Distribution, approx_histogram, neighborhood_mask
from .errors import InvalidParameter
from .rng import RngStream


@dataclass(frozen=True)
class SupportContext:
    """Which distribution a support sub-protocol is about.

    ``center`` and ``alpha`` describe the neighbourhood D is restricted to;
    ``claim`` is the support claim under test.
    """

    center: int | None = None
    alpha: float | None = None
    claim: object = None


# ------------------------------------------------------------------ honest prover helpers

def honest_tag(dist: Distribution, x, bucketing: Bucketing):
    return bucketing.indices(dist.probs[np.asarray(x)])


def find_heavy_representative(dist: Distribution, bucket: int, tau: float | Bucketing) -> int:
    """An element of ``bucket`` whose (tau/3)-neighbourhood is heavy.

    Sorted by mass, the bucket's elements are cut greedily into clusters
    spanning at most a ``1 + tau/3`` factor.  A bucket spans a ``1 + tau``
    factor, so at most three clusters appear and the heaviest holds at least
    a third of the bucket's mass; every member of a cluster lies within the
    ``tau/3``-neighbourhood of its median, which is returned.
    """
    bk = tau if isinstance(tau, Bucketing) else Bucketing(dist.n, tau)
    probs = dist.probs
    idx = np.flatnonzero((probs > 0) & (bk.indices(probs) == bucket))
    if idx.size == 0:
        raise InvalidParameter(f"bucket {bucket} holds no mass")
    order = idx[np.argsort(probs[idx], kind="stable")]
    logs = np.log(probs[order])
    width = math.log1p(bk.tau / 3.0)
    best_mass = -1.0
    best = None
    start = 0
    while start < order.size:
        stop = int(np.searchsorted(logs, logs[start] + width, side="right"))
        # guard against rounding in the log comparison
        while stop > start + 1 and probs[order[stop - 1]] > probs[order[start]] * (1 + bk.tau / 3.0):
            stop -= 1
        mass = math.fsum(probs[order[start:stop]])
        if mass > best_mass:
            best_mass = mass
            best = order[start:stop]
        start = stop
    return int(best[(best.size - 1) // 2])


def honest_relevant_buckets(dist: Distribution, tau: float | Bucketing):
    """Buckets holding at least ``tau / (10 L)`` mass, each with a representative."""
    bk = tau if isinstance(tau, Bucketing) else Bucketing(dist.n, tau)
    masses = approx_histogram(dist, bk).masses
    cut = bk.tau / (10.0 * bk.L)
    K = [int(j) for j in np.flatnonzero(masses >= cut) if masses[j] > 0]
    return K, {j: find_heavy_representative(dist, j, bk) for j in K}


# ------------------------------------------------------------------ provers

@dataclass(frozen=True)
class AdversaryConfig:
    kind: str = "Honest"
    offset: int = 0
    factor: float = 1.0
    target: int | None = None

    KINDS = ("Honest", "Slide", "SupportInflate", "SupportDeflate", "BucketLiarSingle",
             "GreedyTest2", "RandomTagger")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise InvalidParameter(f"unknown adversary kind {self.kind!r}")
        if self.kind == "SupportInflate" and self.factor < 1:
            raise InvalidParameter("SupportInflate needs factor >= 1")
        if self.kind == "SupportDeflate" and not (0 < self.factor <= 1):
            raise InvalidParameter("SupportDeflate needs factor in (0, 1]")

    def to_json(self):
        return {"kind": self.kind, "offset": self.offset, "factor": self.factor, "target": self.target}

    @classmethod
    def from_json(cls, obj) -> AdversaryConfig:
        if isinstance(obj, str):
            return cls(obj)
        return cls(**obj)


class HonestProver:
    """Answers every message truthfully from full knowledge of D."""

    def __init__(self, dist: Distribution, rng: RngStream):
        self.dist = dist
        self.rng = rng
        self._views: dict = {}

    # masses of the distribution a sub-protocol is about
    def view(self, context: SupportContext | None) -> np.ndarray:
        if context is None or context.center is None:
            return self.dist.probs
        key = (context.center, context.alpha)
        if key not in self._views:
            p = self.dist.probs
            mask = neighborhood_mask(p, p[context.center], context.alpha) & (p > 0)
            v = np.where(mask, p, 0.0)
            self._views[key] = v / v.sum()
        return self._views[key]

    # histogram messages
    def relevant_buckets(self, bucketing: Bucketing):
        K, reps = honest_relevant_buckets(self.dist, bucketing)
        return [(j, reps[j]) for j in K]

    def tag_samples(self, samples, bucketing: Bucketing) -> np.ndarray:
        return honest_tag(self.dist, samples, bucketing)

    # support messages
    def claim_support(self, context=None) -> np.ndarray:
        return np.flatnonzero(self.view(context) > 0)

    def pick_in_support(self, Y, context=None) -> np.ndarray:
        Y = np.atleast_2d(np.asarray(Y, dtype=np.int64))
        masses = self.view(context)
        col = kernels.choose_indices(Y, masses, False, self.rng.random(Y.shape[0]))
        picked = Y[np.arange(Y.shape[0]), col]
        return np.where(masses[picked] > 0, picked, -1)

    def guess_planted_indices(self, tuples, context=None) -> np.ndarray:
        tuples = np.atleast_2d(np.asarray(tuples, dtype=np.int64))
        return kernels.choose_indices(tuples, self.view(context), False, self.rng.random(tuples.shape[0]))

    def guess_planted_index(self, tup, context=None) -> int:
        return int(self.guess_planted_indices([tup], context)[0])


class _BestResponseSupport:
    """Support-message strategy of a prover defending a false claim.

    Lists the heaviest elements up to the claim's upper bound (padding with
    mass-zero elements if the support is too small), answers Test 1 with any
    support element, and answers Test 2 with the most likely planted slot.
    """

    list_fraction = 1.0

    def claim_support(self, context=None) -> np.ndarray:
        masses = self.view(context)
        claim = getattr(context, "claim", None)
        supp = np.flatnonzero(masses > 0)
        if claim is None:
            lo, hi = 1, masses.shape[0]
            size = max(1, int(math.floor(self.list_fraction * supp.size)))
        else:
            lo = int(math.ceil(claim.a_lo - 1e-9))
            hi = int(math.floor(claim.b_hi + 1e-9))
            size = int(math.floor(self.list_fraction * hi))
        size = min(max(size, lo), hi, masses.shape[0])
        order = np.argsort(-masses, kind="stable")
        return np.sort(order[:size])

    def pick_in_support(self, Y, context=None) -> np.ndarray:
        picked = HonestProver.pick_in_support(self, Y, context)
        Y = np.atleast_2d(np.asarray(Y, dtype=np.int64))
        # never concede: with no support element on offer, bluff with the first one
        return np.where(picked < 0, Y[:, 0], picked)

    def guess_planted_indices(self, tuples, context=None) -> np.ndarray:
        tuples = np.atleast_2d(np.asarray(tuples, dtype=np.int64))
        return kernels.choose_indices(tuples, self.view(context), True, self.rng.random(tuples.shape[0]))


class SlideProver(_BestResponseSupport, HonestProver):
    """Shifts every bucket tag by ``offset``, keeping representatives."""

    def __init__(self, dist, rng, offset: int):
        super().__init__(dist, rng)
        self.offset = int(offset)

    def _shift(self, tags, L):
        return np.clip(np.asarray(tags) + self.offset, 0, L)

    def relevant_buckets(self, bucketing):
        return [(int(self._shift(j, bucketing.L)), y) for j, y in HonestProver.relevant_buckets(self, bucketing)]

    def tag_samples(self, samples, bucketing):
        return self._shift(honest_tag(self.dist, samples, bucketing), bucketing.L)


class BucketLiarSingle(_BestResponseSupport, HonestProver):
    """Moves one bucket (its representative and its samples) by ``offset``."""

    def __init__(self, dist, rng, target: int | None, offset: int):
        super().__init__(dist, rng)
        self.target = target
        self.offset = int(offset)

    def _target(self, bucketing):
        if self.target is not None:
            return self.target
        K, _ = honest_relevant_buckets(self.dist, bucketing)
        masses = approx_histogram(self.dist, bucketing).masses
        return max(K, key=lambda j: masses[j])

    def relevant_buckets(self, bucketing):
        tgt = self._target(bucketing)
        out = []
        for j, y in HonestProver.relevant_buckets(self, bucketing):
            if j == tgt:
                j = int(np.clip(j + self.offset, 0, bucketing.L))
            out.append((j, y))
        return out

    def tag_samples(self, samples, bucketing):
        tgt = self._target(bucketing)
        tags = honest_tag(self.dist, samples, bucketing)
        return np.where(tags == tgt, np.clip(tags + self.offset, 0, bucketing.L), tags)


class SupportInflate(_BestResponseSupport, HonestProver):
    """Lists ``factor`` times the true support, padding with mass-zero elements."""

    def __init__(self, dist, rng, factor: float):
        super().__init__(dist, rng)
        self.factor = float(factor)

    def claim_support(self, context=None) -> np.ndarray:
        masses = self.view(context)
        supp = np.flatnonzero(masses > 0)
        size = int(math.ceil(self.factor * supp.size))
        claim = getattr(context, "claim", None)
        if claim is not None:
            size = min(max(size, int(math.ceil(claim.a_lo - 1e-9))), int(math.floor(claim.b_hi + 1e-9)))
        size = min(size, masses.shape[0])
        if size <= supp.size:
            return np.sort(supp[np.argsort(-masses[supp], kind="stable")[:size]])
        rest = np.flatnonzero(masses <= 0)
        pad = self.rng.gen.choice(rest, size=size - supp.size, replace=False)
        return np.sort(np.concatenate((supp, pad)))


class SupportDeflate(_BestResponseSupport, HonestProver):
    """Lists only the heaviest ``factor`` share of what the claim allows."""

    def __init__(self, dist, rng, factor: float):
        super().__init__(dist, rng)
        self.list_fraction = float(factor)


class GreedyTest2(HonestProver):
    """Honest except that Test 2 is answered with the most likely slot."""

    def guess_planted_indices(self, tuples, context=None):
        return _BestResponseSupport.guess_planted_indices(self, tuples, context)


class RandomTagger(HonestProver):
    """Tags samples uniformly at random."""

    def tag_samples(self, samples, bucketing):
        return self.rng.integers(0, bucketing.L + 1, size=np.asarray(samples).shape)


def make_prover(config: AdversaryConfig | dict | str | None, dist: Distribution, rng: RngStream):
    cfg = AdversaryConfig() if config is None else (
        config if isinstance(config, AdversaryConfig) else AdversaryConfig.from_json(config))
    if cfg.kind == "Honest":
        return HonestProver(dist, rng)
    if cfg.kind == "Slide":
        return HonestProver(dist, rng) if cfg.offset == 0 else SlideProver(dist, rng, cfg.offset)
    if cfg.kind == "BucketLiarSingle":
        return BucketLiarSingle(dist, rng, cfg.target, cfg.offset)
    if cfg.kind == "SupportInflate":
        return SupportInflate(dist, rng, cfg.factor)
    if cfg.kind == "SupportDeflate":
        return SupportDeflate(dist, rng, cfg.factor)
    if cfg.kind == "GreedyTest2":
        return GreedyTest2(dist, rng)
    return RandomTagger(dist, rng)


def adversary_responses(config, message: str, *args, dist: Distribution, rng: RngStream, **kwargs):
    """Dispatch one message to the prover built from ``config``."""
    return getattr(make_prover(config, dist, rng), message)(*args, **kwargs)
