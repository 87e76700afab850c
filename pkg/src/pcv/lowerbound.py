"""Simulating pair queries from samples on the hard flat instances.

A tester that draws ``k`` samples and then asks ``m`` pair queries can have
its answers reproduced from the samples alone unless some query touches a
support element that was never sampled.  This experiment measures how often
that happens on flat distributions whose support has ``n^(2/3)`` or
``n^(2/3)/K`` randomly placed elements.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidParameter
from .oracles import pcond_sim
from .rng import RngStream


@dataclass
class LowerBoundResult:
    n: int
    m: int
    k: int
    trials: int
    violations: int
    disagreements: int
    rate: float
    bound: float
    sigma: float

    @property
    def within_bound(self) -> bool:
        return self.rate <= self.bound + 4 * self.sigma

    def to_json(self):
        d = asdict(self)
        d["within_bound"] = self.within_bound
        return d


def _trial(n, m, k, K, rng: RngStream):
    g = rng.gen
    yes = g.random() < 0.5
    size = max(1, round(n ** (2.0 / 3.0) / (K if yes else 1.0)))
    support = np.sort(g.choice(n, size=size, replace=False))
    samples = support[g.integers(0, size, size=k)]
    seen = set(samples.tolist())
    if m == 0:
        return False, False
    pick_sample = (g.random((m, 2)) < 0.5) & (k > 0)
    from_samples = samples[g.integers(0, max(k, 1), size=(m, 2))] if k else np.zeros((m, 2), np.int64)
    queries = np.where(pick_sample, from_samples, g.integers(0, n, size=(m, 2)))
    pos = np.searchsorted(support, queries)
    in_supp = support[np.minimum(pos, size - 1)] == queries
    in_seen = np.isin(queries, samples)
    violated = bool(np.any(in_supp & ~in_seen))
    disagree = False
    coins = g.random(m)
    for i in range(m):
        z1, z2 = int(queries[i, 0]), int(queries[i, 1])
        c = coins[i]
        a, b = in_supp[i]
        # the real oracle on a flat distribution
        if not a and not b:
            real = None
        elif a and b:
            real = z1 if c < 0.5 else z2
        else:
            real = z1 if a else z2
        sim = pcond_sim(seen, z1, z2, _Coin(c))
        disagree |= real != sim
    return violated, disagree


class _Coin:
    """Replays a fixed uniform so the real and simulated answers share their coin."""

    def __init__(self, u):
        self.u = u

    def random(self):
        return self.u


def lower_bound_experiment(n: int, m: int, k: int, trials: int, seed: int = 0, K: float = 2.0,
                           c_prime: float = 1.0 / 8.0) -> LowerBoundResult:
    if trials < 1:
        raise InvalidParameter("trials must be positive")
    if n < 8 or m < 0 or k < 0:
        raise InvalidParameter("need n >= 8 and non-negative m, k")
    cap = c_prime * n ** (1.0 / 3.0)
    if m > cap or k > cap:
        raise InvalidParameter(f"m={m}, k={k} exceed C' n^(1/3) = {cap:.3f}")
    root = RngStream(seed, 0x10B0)
    v = d = 0
    for t in range(trials):
        a, b = _trial(n, m, k, K, root.child(t))
        v += a
        d += b
    rate = v / trials
    bound = 4.0 * m / n ** (1.0 / 3.0)
    sigma = math.sqrt(max(rate * (1 - rate), 1.0 / trials) / trials)
    return LowerBoundResult(n, m, k, trials, v, d, rate, bound, sigma)
