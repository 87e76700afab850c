"""Hot loops used by the oracles, protocols and provers.

Every kernel has a loop form compiled with numba and a numpy form.  Both
consume the same pre-drawn uniforms, so the two backends return identical
arrays for identical inputs; ``PCV_NUMBA=0`` selects the numpy forms.
"""
import math

import numpy as np

from ._accel import USE_NUMBA, njit


# ---------------------------------------------------------------- bucketing

def _bucket_indices_loop(p, boundaries, log1p_tau):
    L = boundaries.shape[0] - 1
    out = np.empty(p.shape[0], dtype=np.int64)
    b0 = boundaries[0]
    for i in range(p.shape[0]):
        v = p[i]
        if v <= b0:
            out[i] = 0
            continue
        j = int(math.ceil(math.log(v / b0) / log1p_tau))
        if j < 1:
            j = 1
        if j > L:
            j = L
        while j > 1 and v <= boundaries[j - 1]:
            j -= 1
        while j < L and v > boundaries[j]:
            j += 1
        out[i] = j
    return out


def _bucket_indices_numpy(p, boundaries, log1p_tau):
    L = boundaries.shape[0] - 1
    b0 = boundaries[0]
    light = p <= b0
    with np.errstate(divide="ignore", invalid="ignore"):
        raw = np.ceil(np.log(np.where(light, b0, p) / b0) / log1p_tau)
    j = np.clip(raw, 1, L).astype(np.int64)
    # a closed-form guess is off by at most a few ulps; walk it onto the interval
    while True:
        down = (~light) & (j > 1) & (p <= boundaries[np.maximum(j - 1, 0)])
        up = (~light) & (j < L) & (p > boundaries[j])
        if not (down.any() or up.any()):
            break
        j = j - down + up
    j[light] = 0
    return j


# ---------------------------------------------------------------- alias tables

def _alias_build_loop(probs):
    n = probs.shape[0]
    total = 0.0
    for i in range(n):
        total += probs[i]
    scaled = np.empty(n, dtype=np.float64)
    for i in range(n):
        scaled[i] = probs[i] * n / total
    prob = np.ones(n, dtype=np.float64)
    alias = np.arange(n).astype(np.int64)
    small = np.empty(n, dtype=np.int64)
    large = np.empty(n, dtype=np.int64)
    ns = 0
    nl = 0
    for i in range(n):
        if scaled[i] < 1.0:
            small[ns] = i
            ns += 1
        else:
            large[nl] = i
            nl += 1
    while ns > 0 and nl > 0:
        ns -= 1
        s = small[ns]
        l = large[nl - 1]
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = (scaled[l] + scaled[s]) - 1.0
        if scaled[l] < 1.0:
            nl -= 1
            small[ns] = l
            ns += 1
    # leftovers are 1 up to rounding
    for k in range(nl):
        prob[large[k]] = 1.0
    for k in range(ns):
        prob[small[k]] = 1.0
    return prob, alias


def _alias_sample_loop(prob, alias, u):
    n = prob.shape[0]
    out = np.empty(u.shape[0], dtype=np.int64)
    for k in range(u.shape[0]):
        x = u[k] * n
        i = int(x)
        if i >= n:
            i = n - 1
        if x - i < prob[i]:
            out[k] = i
        else:
            out[k] = alias[i]
    return out


def _alias_sample_numpy(prob, alias, u):
    n = prob.shape[0]
    x = u * n
    i = np.minimum(x.astype(np.int64), n - 1)
    return np.where(x - i < prob[i], i, alias[i])


# ---------------------------------------------------------------- tuple guessing

def _guess_loop(tuples, masses, greedy, u):
    rows, width = tuples.shape
    out = np.empty(rows, dtype=np.int64)
    for r in range(rows):
        best = 0.0
        count = 0
        for c in range(width):
            m = masses[tuples[r, c]]
            if m <= 0.0:
                continue
            if greedy:
                if m > best:
                    best = m
                    count = 1
                elif m == best:
                    count += 1
            else:
                count += 1
        if count == 0:
            out[r] = min(int(u[r] * width), width - 1)
            continue
        pick = int(u[r] * count)
        if pick >= count:
            pick = count - 1
        seen = 0
        for c in range(width):
            m = masses[tuples[r, c]]
            if m <= 0.0 or (greedy and m != best):
                continue
            if seen == pick:
                out[r] = c
                break
            seen += 1
    return out


def _guess_numpy(tuples, masses, greedy, u):
    rows, width = tuples.shape
    m = masses[tuples]
    if greedy:
        best = m.max(axis=1, keepdims=True)
        eligible = (m == best) & (m > 0)
    else:
        eligible = m > 0
    count = eligible.sum(axis=1)
    pick = np.minimum((u * np.maximum(count, 1)).astype(np.int64), np.maximum(count - 1, 0))
    # column of the (pick+1)-th eligible entry in each row
    rank = np.cumsum(eligible, axis=1) - 1
    hit = eligible & (rank == pick[:, None])
    out = np.argmax(hit, axis=1).astype(np.int64)
    none = count == 0
    out[none] = np.minimum((u[none] * width).astype(np.int64), width - 1)
    return out


# ---------------------------------------------------------------- sampler segments

def _segments_loop(inside, cap, want):
    """Split a raw stream into attempts of at most ``cap`` draws each.

    An attempt ends at its first inside draw (recorded as that position) or
    after ``cap`` outside draws (recorded as -1).  Stops once ``want`` attempts
    are complete; returns the attempt results and the raw draws consumed.
    """
    picks = np.empty(want, dtype=np.int64)
    filled = 0
    pos = 0
    n = inside.shape[0]
    while filled < want:
        if pos + cap > n:
            # an attempt might run past the end; only finish if it hits inside
            k = pos
            found = -1
            while k < n:
                if inside[k]:
                    found = k
                    break
                k += 1
            if found < 0:
                break
            picks[filled] = found
            filled += 1
            pos = found + 1
            continue
        found = -1
        for k in range(pos, pos + cap):
            if inside[k]:
                found = k
                break
        picks[filled] = found
        filled += 1
        pos = found + 1 if found >= 0 else pos + cap
    return picks[:filled], pos


if USE_NUMBA:
    _bucket_impl = njit(_bucket_indices_loop)
    _alias_sample_impl = njit(_alias_sample_loop)
    _guess_impl = njit(_guess_loop)
    _alias_build_impl = njit(_alias_build_loop)
    _segments_impl = njit(_segments_loop)
else:
    _bucket_impl = _bucket_indices_numpy
    _alias_sample_impl = _alias_sample_numpy
    _guess_impl = _guess_numpy
    _alias_build_impl = _alias_build_loop
    _segments_impl = _segments_loop


def bucket_indices(p, boundaries, log1p_tau):
    p = np.ascontiguousarray(p, dtype=np.float64)
    return _bucket_impl(p, np.ascontiguousarray(boundaries, dtype=np.float64), float(log1p_tau))


def alias_build(probs):
    return _alias_build_impl(np.ascontiguousarray(probs, dtype=np.float64))


def alias_sample(prob, alias, u):
    return _alias_sample_impl(prob, alias, np.ascontiguousarray(u, dtype=np.float64))


def choose_indices(tuples, masses, greedy, u):
    """Index picked in each tuple row.

    Non-greedy picks uniformly among entries of positive mass; greedy picks
    uniformly among the entries of largest mass.  Rows with no positive-mass
    entry fall back to a uniform column.
    """
    return _guess_impl(np.ascontiguousarray(tuples, dtype=np.int64),
                       np.ascontiguousarray(masses, dtype=np.float64),
                       bool(greedy), np.ascontiguousarray(u, dtype=np.float64))


def sampler_segments(inside, cap, want):
    return _segments_impl(np.ascontiguousarray(inside, dtype=np.bool_), int(cap), int(want))


# both forms are importable for the parity tests and the benchmark
LOOP_FORMS = {
    "bucket_indices": _bucket_indices_loop,
    "alias_sample": _alias_sample_loop,
    "choose_indices": _guess_loop,
}
NUMPY_FORMS = {
    "bucket_indices": _bucket_indices_numpy,
    "alias_sample": _alias_sample_numpy,
    "choose_indices": _guess_numpy,
}
