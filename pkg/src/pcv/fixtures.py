"""Named distribution generators and JSON fixture files."""
from __future__ import annotations

import json
import math

import numpy as np

from .distributions import Distribution
from .errors import InvalidParameter
from .rng import RngStream


def _place(n: int, weights: np.ndarray, rng: RngStream | None, shuffle: bool) -> Distribution:
    if weights.shape[0] > n:
        raise InvalidParameter(f"{weights.shape[0]} support elements do not fit in a domain of {n}")
    full = np.zeros(n)
    if shuffle and rng is not None:
        where = rng.gen.choice(n, size=weights.shape[0], replace=False)
    else:
        where = np.arange(weights.shape[0])
    full[where] = weights
    return Distribution.from_weights(full)


def flat(n: int, support: int, rng=None, shuffle=True) -> Distribution:
    if not (1 <= support <= n):
        raise InvalidParameter(f"support must lie in [1, {n}]")
    return _place(n, np.ones(int(support)), rng, shuffle)


def kappa_flat(n: int, support: int, kappa: float, rng=None, shuffle=True) -> Distribution:
    """Masses drawn log-uniformly so that max/min stays within ``kappa``."""
    if kappa < 1:
        raise InvalidParameter("kappa must be at least 1")
    g = rng.gen if rng is not None else np.random.default_rng(0)
    w = np.exp(g.uniform(0.0, math.log(kappa), size=int(support)))
    return _place(n, w, rng, shuffle)


def two_level(n: int, sizes, ratio: float, rng=None, shuffle=True) -> Distribution:
    """``sizes[0]`` elements of mass a and ``sizes[1]`` of mass ``ratio * a``."""
    k1, k2 = (int(v) for v in sizes)
    if k1 < 0 or k2 < 0 or k1 + k2 == 0 or ratio <= 0:
        raise InvalidParameter("two_level needs non-negative sizes and a positive ratio")
    return _place(n, np.r_[np.ones(k1), np.full(k2, float(ratio))], rng, shuffle)


def zipf(n: int, exponent: float, support: int | None = None, rng=None, shuffle=False) -> Distribution:
    k = n if support is None else int(support)
    return _place(n, np.arange(1, k + 1, dtype=np.float64) ** -float(exponent), rng, shuffle)


def hard_no(n: int, rng=None) -> Distribution:
    """Flat on ``n^(2/3)`` uniformly placed elements."""
    return flat(n, max(1, round(n ** (2.0 / 3.0))), rng, True)


def hard_yes(n: int, K: float, rng=None) -> Distribution:
    """Flat on ``n^(2/3) / K`` uniformly placed elements."""
    return flat(n, max(1, round(n ** (2.0 / 3.0) / K)), rng, True)


def point(n: int, element: int = 0, rng=None) -> Distribution:
    w = np.zeros(n)
    w[int(element)] = 1.0
    return Distribution(n, w)


GENERATORS = {
    "flat": lambda n, rng, support, shuffle=True: flat(n, support, rng, shuffle),
    "kappa_flat": lambda n, rng, support, kappa, shuffle=True: kappa_flat(n, support, kappa, rng, shuffle),
    "two_level": lambda n, rng, sizes, ratio, shuffle=True: two_level(n, sizes, ratio, rng, shuffle),
    "zipf": lambda n, rng, exponent, support=None, shuffle=False: zipf(n, exponent, support, rng, shuffle),
    "hard_yes": lambda n, rng, K: hard_yes(n, K, rng),
    "hard_no": lambda n, rng: hard_no(n, rng),
    "point": lambda n, rng, element=0: point(n, element),
}


def generate_fixture(name: str, params: dict, seed: int = 0) -> Distribution:
    """Build the named fixture; ``params`` must include the domain size ``n``."""
    if name not in GENERATORS:
        raise InvalidParameter(f"unknown generator {name!r}; known: {sorted(GENERATORS)}")
    params = dict(params)
    try:
        n = int(params.pop("n"))
    except KeyError:
        raise InvalidParameter("fixture parameters need the domain size n") from None
    try:
        return GENERATORS[name](n, RngStream(seed, 0xF1C5), **params)
    except TypeError as e:
        raise InvalidParameter(f"bad parameters for {name}: {e}") from None


def load_fixture(spec: dict) -> Distribution:
    """Fixture from ``{"path": ...}`` or ``{"name": ..., "params": {...}, "seed": ...}``."""
    if "path" in spec:
        try:
            with open(spec["path"]) as fh:
                return Distribution.from_json(json.load(fh))
        except (OSError, ValueError, KeyError) as e:
            raise InvalidParameter(f"cannot load fixture {spec['path']}: {e}") from None
    return generate_fixture(spec["name"], spec.get("params", {}), int(spec.get("seed", 0)))


def save_fixture(dist: Distribution, path: str):
    with open(path, "w") as fh:
        json.dump(dist.to_json(), fh)
