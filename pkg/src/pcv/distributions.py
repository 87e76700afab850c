"""Discrete distributions over [n], bucketing, histograms and distances."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from . import kernels
from .errors import DomainMismatch, InvalidParameter, MismatchedBucketing, WeightMismatch

SUM_TOL = 1e-12


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Distribution:
    """Explicit probability mass function over the domain ``{0, ..., n-1}``."""

    n: int
    probs: np.ndarray
    _alias: tuple = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or int(self.n) < 1 or probs.shape[0] != int(self.n):
            raise InvalidParameter(f"probs must have length n={self.n}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise InvalidParameter("probabilities must be finite and non-negative")
        total = math.fsum(probs)
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidParameter(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_weights(cls, weights) -> Distribution:
        """Normalise non-negative weights, correcting the last ulp drift."""
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1 or np.any(w < 0) or w.sum() <= 0:
            raise InvalidParameter("weights must be non-negative with positive sum")
        p = w / math.fsum(w)
        drift = 1.0 - math.fsum(p)
        if drift:
            p[int(np.argmax(p))] += drift
        return cls(p.shape[0], p)

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs))

    def alias_table(self):
        """Walker alias table, built once per distribution."""
        if self._alias is None:
            object.__setattr__(self, "_alias", kernels.alias_build(self.probs))
        return self._alias

    def to_json(self) -> dict:
        return {"n": self.n, "probs": self.probs.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> Distribution:
        return cls(int(obj["n"]), obj["probs"])


def num_buckets(n: int, tau: float) -> int:
    if not (0 < tau <= 1):
        raise InvalidParameter(f"tau must lie in (0, 1], got {tau}")
    if n < 2:
        raise InvalidParameter(f"n must be at least 2, got {n}")
    return int(math.ceil(math.log(n / tau) / math.log1p(tau)))


@dataclass(frozen=True, eq=False)
class Bucketing:
    """Multiplicative partition of [0, 1] into ``num_buckets_L + 1`` buckets.

    Bucket 0 holds values ``<= tau/n``; bucket ``l >= 1`` holds the interval
    ``(tau (1+tau)^(l-1) / n, tau (1+tau)^l / n]``.  ``boundaries[l]`` is the
    upper endpoint of bucket ``l``.
    """

    n: int
    tau: float
    num_buckets_L: int = field(init=False)
    boundaries: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        L = num_buckets(self.n, self.tau)
        b = self.tau * np.power(1.0 + self.tau, np.arange(L + 1, dtype=np.float64)) / self.n
        b[-1] = max(b[-1], 1.0)
        object.__setattr__(self, "num_buckets_L", L)
        object.__setattr__(self, "boundaries", _frozen(b))

    def __eq__(self, other):
        return isinstance(other, Bucketing) and self.n == other.n and self.tau == other.tau

    def __hash__(self):
        return hash((self.n, self.tau))

    @property
    def L(self) -> int:
        return self.num_buckets_L

    def position(self, j) -> np.ndarray | float:
        """Representative value of bucket ``j`` (its upper endpoint)."""
        return self.tau * (1.0 + self.tau) ** np.asarray(j, dtype=np.float64) / self.n

    def indices(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=np.float64)
        if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
            raise InvalidParameter("probabilities must lie in [0, 1]")
        return kernels.bucket_indices(p.ravel(), self.boundaries, math.log1p(self.tau)).reshape(p.shape)


def bucket_of(p: float, bucketing: Bucketing) -> int:
    return int(bucketing.indices(np.array([p]))[0])


@dataclass(frozen=True, eq=False)
class ApproxHistogram:
    """Per-bucket probability mass ``masses[j]`` for ``j = 0..L``."""

    bucketing: Bucketing
    masses: np.ndarray

    def __post_init__(self):
        m = _frozen(self.masses)
        if m.shape != (self.bucketing.L + 1,):
            raise InvalidParameter(f"expected {self.bucketing.L + 1} bucket masses, got {m.shape}")
        if np.any(m < -1e-15) or np.any(m > 1 + 1e-12):
            raise InvalidParameter("bucket masses must lie in [0, 1]")
        object.__setattr__(self, "masses", m)

    def to_json(self) -> dict:
        nz = np.flatnonzero(self.masses)
        return {"n": self.bucketing.n, "tau": self.bucketing.tau,
                "masses": {int(j): float(self.masses[j]) for j in nz}}


def approx_histogram(dist: Distribution, tau: float | Bucketing) -> ApproxHistogram:
    bk = tau if isinstance(tau, Bucketing) else Bucketing(dist.n, tau)
    idx = bk.indices(dist.probs)
    masses = np.bincount(idx, weights=dist.probs, minlength=bk.L + 1)
    # a full bucket can sum to 1 + ulp
    return ApproxHistogram(bk, np.minimum(masses, 1.0))


@dataclass(frozen=True)
class NeighborhoodSpec:
    center: int
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise InvalidParameter("kappa must be positive")


def neighborhood_mask(probs: np.ndarray, center_mass: float, kappa: float) -> np.ndarray:
    """Elements whose mass is within a ``1 + kappa`` factor of ``center_mass``."""
    return (probs * (1.0 + kappa) >= center_mass) & (probs <= (1.0 + kappa) * center_mass)


def neighborhood(dist: Distribution, spec: NeighborhoodSpec) -> set[int]:
    mask = neighborhood_mask(dist.probs, dist.probs[spec.center], spec.kappa)
    return set(np.flatnonzero(mask).tolist())


def _same_domain(d1: Distribution, d2: Distribution):
    if d1.n != d2.n:
        raise DomainMismatch(f"domains differ: {d1.n} vs {d2.n}")


def tv_distance(d1: Distribution, d2: Distribution) -> float:
    _same_domain(d1, d2)
    return 0.5 * math.fsum(np.abs(d1.probs - d2.probs))


def rl_distance(d1: Distribution, d2: Distribution) -> float:
    _same_domain(d1, d2)
    a = np.sort(d1.probs)[::-1]
    b = np.sort(d2.probs)[::-1]
    return 0.5 * math.fsum(np.abs(a - b))


def histogram_weights(h: ApproxHistogram, weight_mode: Literal["counts", "fractions"] = "counts"):
    """Atoms ``(positions, weights)`` of the value histogram implied by ``h``.

    Bucket ``j`` contributes ``masses[j] / position(j)`` elements at its
    representative value.  The remaining elements of the domain sit at value
    0, so every histogram over the same bucketing has total count ``n``
    (``fractions`` divides all weights by ``n``).
    """
    bk = h.bucketing
    pos = bk.position(np.arange(bk.L + 1))
    counts = h.masses / pos
    zero = bk.n - math.fsum(counts)
    if zero < -1e-9 * bk.n:
        raise WeightMismatch(f"histogram implies {bk.n - zero:.6g} elements on a domain of {bk.n}")
    positions = np.concatenate(([0.0], pos))
    weights = np.concatenate(([max(zero, 0.0)], counts))
    if weight_mode == "fractions":
        weights = weights / bk.n
    elif weight_mode != "counts":
        raise InvalidParameter(f"unknown weight mode {weight_mode!r}")
    return positions, weights


def emd_histograms(h1: ApproxHistogram, h2: ApproxHistogram,
                   weight_mode: Literal["counts", "fractions"] = "counts") -> float:
    """1-D transport cost between the value histograms of ``h1`` and ``h2``."""
    if h1.bucketing != h2.bucketing:
        raise MismatchedBucketing("histograms use different bucketings")
    pos, w1 = histogram_weights(h1, weight_mode)
    _, w2 = histogram_weights(h2, weight_mode)
    total = w1.sum()
    if abs(total - w2.sum()) > 1e-9 * max(1.0, total):
        raise WeightMismatch("histograms carry different total weight")
    cdf_gap = np.cumsum(w1 - w2)[:-1]
    return float(math.fsum(np.abs(cdf_gap) * np.diff(pos)))
