import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pcv.distributions import Bucketing, Distribution, approx_histogram, neighborhood_mask
from pcv.errors import InvalidParameter
from pcv.fixtures import flat, two_level
from pcv.provers import (AdversaryConfig, BucketLiarSingle, GreedyTest2, HonestProver, RandomTagger,
                         SlideProver, SupportContext, SupportDeflate, SupportInflate,
                         adversary_responses, find_heavy_representative, honest_relevant_buckets,
                         honest_tag, make_prover)
from pcv.rng import RngStream
from pcv.support_size import SupportClaim


def neighbourhood_mass(dist, y, tau):
    return dist.probs[neighborhood_mask(dist.probs, dist.probs[y], tau / 3.0)].sum()


def assert_heavy(dist, tau):
    bk = Bucketing(dist.n, tau)
    tags = bk.indices(dist.probs)
    # bucket 0 has no lower edge, so its masses can spread arbitrarily far
    # apart and no single neighbourhood is guaranteed a third of it
    for j in np.unique(tags[(dist.probs > 0) & (tags > 0)]):
        p = dist.probs[tags == j].sum()
        y = find_heavy_representative(dist, int(j), bk)
        assert tags[y] == j
        assert neighbourhood_mass(dist, y, tau) >= p / 3.0 * (1 - 1e-12)


# ------------------------------------------------------------------ representatives

def test_flat_representative_is_in_support():
    d = flat(500, 40, RngStream(0, 0))
    j = int(Bucketing(500, 0.2).indices(np.array([1 / 40]))[0])
    y = find_heavy_representative(d, j, 0.2)
    assert d.probs[y] > 0
    assert neighbourhood_mass(d, y, 0.2) == pytest.approx(1.0)


def test_representative_at_bucket_edges():
    tau, n = 0.3, 1000
    bk = Bucketing(n, tau)
    hi = bk.boundaries[5]
    lo = hi / (1 + tau) * (1 + 1e-9)  # just inside the lower open edge
    w = np.zeros(n)
    w[:30] = lo
    w[30:50] = hi
    w[50] = 1 - w.sum()
    d = Distribution(n, w)
    assert set(bk.indices(d.probs[:50]).tolist()) == {5}
    assert_heavy(d, tau)


def test_representative_on_geometric_spread():
    tau, n = 0.5, 2000
    bk = Bucketing(n, tau)
    hi = bk.boundaries[5]
    k = 60
    vals = hi * (1 + tau) ** (-np.arange(k) / k)
    w = np.zeros(n)
    w[:k] = vals
    w[k] = 1 - vals.sum()
    d = Distribution(n, w)
    bucket = np.flatnonzero(bk.indices(d.probs) == 5)
    assert bucket.size == k
    p = d.probs[bucket].sum()
    y = find_heavy_representative(d, 5, bk)
    best = max(neighbourhood_mass(d, int(c), tau) for c in bucket)
    assert neighbourhood_mass(d, y, tau) >= p / 3.0
    assert best >= p / 3.0


def test_light_bucket_representative_is_heaviest_cluster_median():
    n, tau = 1000, 0.2
    w = np.zeros(n)
    w[:10] = 1e-8            # far below the light cluster
    w[10:20] = 1e-5          # the heaviest cluster of bucket 0
    w[20] = 1 - w.sum()
    d = Distribution(n, w)
    assert np.all(Bucketing(n, tau).indices(d.probs[:20]) == 0)
    assert 10 <= find_heavy_representative(d, 0, tau) < 20


def test_representative_empty_bucket():
    with pytest.raises(InvalidParameter):
        find_heavy_representative(flat(100, 10, shuffle=False), 0, 0.2)


def test_representative_property_on_random_fixtures():
    g = np.random.default_rng(20261016)
    for _ in range(1000):
        n = int(g.integers(2, 300))
        tau = float(g.uniform(0.01, 1.0))
        shape = g.integers(3)
        if shape == 0:
            w = g.exponential(size=n)
        elif shape == 1:
            w = np.exp(g.uniform(0, math.log1p(tau) * g.integers(1, 6), size=n))
        else:
            w = g.pareto(1.5, size=n) + 1e-3
        w[g.random(n) < 0.3] = 0
        if w.sum() == 0:
            w[0] = 1
        assert_heavy(Distribution.from_weights(w), tau)


@settings(max_examples=60)
@given(st.lists(st.floats(1e-3, 1.0), min_size=2, max_size=40), st.floats(0.01, 1.0))
def test_representative_property(ws, tau):
    assert_heavy(Distribution.from_weights(np.array(ws)), tau)


def test_relevant_buckets_cut():
    tau, n = 0.2, 10**4
    d = two_level(n, [5000, 1], 1.0, shuffle=False)
    bk = Bucketing(n, tau)
    K, reps = honest_relevant_buckets(d, bk)
    masses = approx_histogram(d, bk).masses
    cut = tau / (10 * bk.L)
    assert set(K) == {int(j) for j in np.flatnonzero(masses >= cut)}
    assert all(bk.indices(d.probs[[reps[j]]])[0] == j for j in K)


# ------------------------------------------------------------------ honest messages

def test_honest_tags_and_support():
    d = two_level(100, [10, 5], 2.0, RngStream(1, 1))
    bk = Bucketing(100, 0.1)
    pv = HonestProver(d, RngStream(0, 0))
    xs = np.arange(100)
    assert np.array_equal(pv.tag_samples(xs, bk), honest_tag(d, xs, bk))
    assert np.array_equal(pv.claim_support(), d.support)


def test_honest_pick_prefers_support_or_concedes():
    d = flat(50, 5, shuffle=False)
    pv = HonestProver(d, RngStream(0, 0))
    Y = np.array([[10, 3, 20], [30, 31, 32]])
    assert pv.pick_in_support(Y).tolist() == [3, -1]


def test_view_restricts_to_neighbourhood():
    d = two_level(40, [10, 10], 3.0, shuffle=False)
    pv = HonestProver(d, RngStream(0, 0))
    v = pv.view(SupportContext(center=15, alpha=0.5))
    assert np.flatnonzero(v).tolist() == list(range(10, 20))
    assert v.sum() == pytest.approx(1.0)
    assert pv.view(None) is d.probs


# ------------------------------------------------------------------ adversaries

def test_slide_zero_matches_honest():
    d = two_level(1000, [40, 20], 2.0, RngStream(2, 2))
    bk = Bucketing(1000, 0.2)
    xs = np.arange(1000)
    Y = RngStream(9, 9).integers(0, 1000, size=(200, 6))
    a, b = HonestProver(d, RngStream(5, 5)), SlideProver(d, RngStream(5, 5), 0)
    assert a.relevant_buckets(bk) == b.relevant_buckets(bk)
    assert np.array_equal(a.tag_samples(xs, bk), b.tag_samples(xs, bk))
    assert np.array_equal(a.claim_support(), HonestProver.claim_support(b))
    assert np.array_equal(a.guess_planted_indices(Y), HonestProver.guess_planted_indices(b, Y))
    assert isinstance(make_prover({"kind": "Slide", "offset": 0}, d, RngStream(0, 0)), HonestProver)


def test_slide_shifts_and_clamps():
    d = flat(1000, 64, RngStream(0, 1))
    bk = Bucketing(1000, 0.2)
    honest = HonestProver(d, RngStream(0, 0))
    up = SlideProver(d, RngStream(0, 0), 3)
    xs = d.support
    assert np.array_equal(up.tag_samples(xs, bk), honest.tag_samples(xs, bk) + 3)
    [(j0, y0)], [(j1, y1)] = honest.relevant_buckets(bk), up.relevant_buckets(bk)
    assert (j1, y1) == (j0 + 3, y0)
    far = SlideProver(d, RngStream(0, 0), 10 * bk.L)
    assert np.all(far.tag_samples(xs, bk) == bk.L)
    assert np.all(SlideProver(d, RngStream(0, 0), -10 * bk.L).tag_samples(xs, bk) == 0)


def test_bucket_liar_moves_one_bucket():
    d = two_level(1000, [100, 50], 4.0, shuffle=False)
    bk = Bucketing(1000, 0.2)
    honest = dict(HonestProver(d, RngStream(0, 0)).relevant_buckets(bk))
    heavy = max(honest, key=lambda j: approx_histogram(d, bk).masses[j])
    liar = BucketLiarSingle(d, RngStream(0, 0), None, 2)
    moved = dict(liar.relevant_buckets(bk))
    assert set(moved) == {j if j != heavy else j + 2 for j in honest}
    tags = honest_tag(d, np.arange(150), bk)
    lied = liar.tag_samples(np.arange(150), bk)
    assert np.array_equal(lied, np.where(tags == heavy, tags + 2, tags))


def test_greedy_forced_and_uniform():
    d = flat(100, 2, shuffle=False)  # support {0, 1}
    pv = GreedyTest2(d, RngStream(3, 3))
    forced = np.array([[50, 60, 1, 70]] * 100)
    assert np.all(pv.guess_planted_indices(forced) == 2)
    trials = 10**4
    two = np.tile(np.array([[50, 0, 60, 1]]), (trials, 1))
    picks = pv.guess_planted_indices(two)
    assert set(np.unique(picks).tolist()) == {1, 3}
    assert abs(np.mean(picks == 1) - 0.5) <= 0.02


def test_greedy_prefers_heavier_entries():
    d = two_level(100, [5, 5], 3.0, shuffle=False)  # 5..9 are heavier
    pv = GreedyTest2(d, RngStream(0, 0))
    assert pv.guess_planted_indices([[0, 1, 7, 50]]).tolist() == [2]
    # the honest answer is uniform among in-support entries
    honest = HonestProver(d, RngStream(0, 0)).guess_planted_indices(np.tile([0, 1, 7, 50], (3000, 1)))
    assert set(np.unique(honest).tolist()) == {0, 1, 2}


def test_inflate_pads_outside_support():
    d = flat(1000, 20, RngStream(0, 0))
    listing = SupportInflate(d, RngStream(1, 1), 5.0).claim_support()
    assert listing.size == 100 and np.unique(listing).size == 100
    assert set(d.support.tolist()) <= set(listing.tolist())
    claim = SupportClaim(20, 100, 122, 412)
    capped = SupportInflate(d, RngStream(1, 1), 50.0).claim_support(SupportContext(claim=claim))
    assert capped.size == 122


def test_deflate_lists_heaviest():
    d = two_level(1000, [30, 10], 2.0, shuffle=False)
    listing = SupportDeflate(d, RngStream(0, 0), 0.25).claim_support()
    assert listing.tolist() == list(range(30, 40))
    claim = SupportClaim(5, 10, 20, 25)
    full = SupportDeflate(d, RngStream(0, 0), 1.0).claim_support(SupportContext(claim=claim))
    assert full.size == 20 and set(range(30, 40)) <= set(full.tolist())


def test_best_response_never_concedes():
    d = flat(100, 2, shuffle=False)
    pv = SupportDeflate(d, RngStream(0, 0), 1.0)
    assert pv.pick_in_support([[40, 41, 42], [40, 1, 42]]).tolist() == [40, 1]


def test_random_tagger_range():
    bk = Bucketing(100, 0.5)
    tags = RandomTagger(flat(100, 10), RngStream(0, 0)).tag_samples(np.zeros(5000, int), bk)
    assert tags.min() == 0 and tags.max() == bk.L


def test_adversary_config():
    assert AdversaryConfig.from_json("GreedyTest2").kind == "GreedyTest2"
    cfg = AdversaryConfig("Slide", offset=3)
    assert AdversaryConfig.from_json(cfg.to_json()) == cfg
    for bad in (dict(kind="Nope"), dict(kind="SupportInflate", factor=0.5),
                dict(kind="SupportDeflate", factor=1.5)):
        with pytest.raises(InvalidParameter):
            AdversaryConfig(**bad)
    d = flat(100, 10)
    kinds = {k: type(make_prover({"kind": k, "offset": 1}, d, RngStream(0, 0))).__name__
             for k in AdversaryConfig.KINDS}
    assert kinds["Slide"] == "SlideProver" and kinds["Honest"] == "HonestProver"
    assert type(make_prover(None, d, RngStream(0, 0))) is HonestProver
    out = adversary_responses("Honest", "claim_support", dist=d, rng=RngStream(0, 0))
    assert np.array_equal(out, d.support)
