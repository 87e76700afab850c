import math

import numpy as np
import pytest
from scipy.special import comb, stirling2

from pcv.errors import InvalidParameter
from pcv.lowerbound import _trial, lower_bound_experiment
from pcv.rng import RngStream


def exact_violation(n, m, k, K):
    """P(some query endpoint is an unsampled support element).

    Each of the 2m endpoints is a uniform domain element with probability
    1/2 (otherwise a sample), so given u unseen support elements the run is
    clean with probability (1 - u/(2n))^(2m).  The number of distinct
    samples follows the occupancy law.
    """
    total = 0.0
    for size in (max(1, round(n ** (2 / 3) / K)), max(1, round(n ** (2 / 3)))):
        clean = 0.0
        for d in range(1, k + 1):
            pd = comb(size, d, exact=True) * math.factorial(d) * stirling2(k, d, exact=True) / size ** k
            clean += float(pd) * (1 - (size - d) / (2 * n)) ** (2 * m)
        if k == 0:
            clean = (1 - size / (2 * n)) ** (2 * m)
        total += 0.5 * (1 - clean)
    return total


def test_zero_queries():
    r = lower_bound_experiment(10**5, 0, 5, 2000)
    assert r.rate == 0 and r.violations == 0 and r.disagreements == 0


def test_example_point():
    r = lower_bound_experiment(10**6, 10, 10, 10**4)
    assert r.bound == pytest.approx(0.4)
    assert r.within_bound
    assert abs(r.rate - exact_violation(10**6, 10, 10, 2.0)) <= 4 * r.sigma


def test_rate_matches_exact_law():
    r = lower_bound_experiment(10**5, 5, 3, 10**4)
    assert abs(r.rate - exact_violation(10**5, 5, 3, 2.0)) <= 4 * r.sigma


def test_doubling_queries():
    a = lower_bound_experiment(10**6, 5, 5, 10**4, seed=1)
    b = lower_bound_experiment(10**6, 10, 5, 10**4, seed=2)
    assert b.rate <= 2 * a.rate + 4 * math.hypot(2 * a.sigma, b.sigma)
    assert b.rate >= a.rate - 4 * math.hypot(a.sigma, b.sigma)


def test_disagreement_implies_violation():
    root = RngStream(7, 0)
    for t in range(2000):
        violated, disagree = _trial(1000, 8, 4, 2.0, root.child(t))
        assert violated or not disagree


def test_guards():
    with pytest.raises(InvalidParameter):
        lower_bound_experiment(10**5, 10, 10, 100)  # 10 > n^(1/3)/8
    with pytest.raises(InvalidParameter):
        lower_bound_experiment(10**5, 1, 1, 0)
    with pytest.raises(InvalidParameter):
        lower_bound_experiment(4, 0, 0, 10)
    assert lower_bound_experiment(10**5, 10, 10, 100, c_prime=0.5).trials == 100


def test_deterministic():
    a = lower_bound_experiment(10**5, 5, 5, 500, seed=3)
    b = lower_bound_experiment(10**5, 5, 5, 500, seed=3)
    assert a == b
