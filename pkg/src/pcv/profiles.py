"""Constant profiles: how derived sample and query counts are realised.

Every count a protocol derives from its parameters goes through
:meth:`Profile.count`, which applies that count's :class:`CountRule`.  The
``paper`` profile leaves counts untouched; ``relaxed-default`` shrinks the
counts that are astronomically large at laboratory scale.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace

from .errors import InvalidParameter

COUNT_KEYS = (
    "compare_queries",     # PCond queries inside one compare call
    "isinsupport_queries", # query budget T of one membership check
    "en_T",                # number of rings T in neighbourhood estimation
    "en_samples",          # samples m classified by neighbourhood estimation
    "sampler_cap",         # raw draws per neighbourhood-sampler attempt
    "amp_T1",              # repetitions of large-support Test 1
    "amp_T2",              # repetitions of large-support Test 2
    "small_s1",            # membership checks in small-support Test 1
    "small_s2",            # samples in small-support Test 2
    "hist_samples",        # samples s of the histogram protocol
)


@dataclass(frozen=True)
class CountRule:
    """``min(cap, max(1, ceil(scale * raw)))``."""

    scale: float = 1.0
    cap: int | None = None

    def __post_init__(self):
        if not (0 < self.scale <= 1):
            raise InvalidParameter(f"scale factors must lie in (0, 1], got {self.scale}")
        if self.cap is not None and self.cap < 1:
            raise InvalidParameter("caps must be positive")

    def apply(self, raw: float) -> int:
        if not raw > 0:
            raise InvalidParameter(f"derived count must be positive, got {raw}")
        if math.isinf(raw):
            if self.cap is None:
                raise InvalidParameter("unbounded count without a cap")
            return int(self.cap)
        v = max(1, math.ceil(self.scale * raw - 1e-9))
        if self.cap is not None:
            v = min(v, int(self.cap))
        return int(v)


@dataclass(frozen=True)
class Profile:
    name: str
    rules: dict = field(default_factory=dict)
    eta_floor: float = 0.0        # lower bound on eta, as a multiple of tau
    c_sample: float = 0.01        # failure constant of the neighbourhood sampler
    tau_factor: float = 0.01      # internal tau = tau_factor * tau_prime
    sampler_retries: int = 3

    def __post_init__(self):
        unknown = set(self.rules) - set(COUNT_KEYS)
        if unknown:
            raise InvalidParameter(f"unknown count keys: {sorted(unknown)}")
        if not (0 < self.tau_factor <= 1) or not (0 < self.c_sample < 1):
            raise InvalidParameter("tau_factor must lie in (0, 1] and c_sample in (0, 1)")
        if self.eta_floor < 0 or self.sampler_retries < 0:
            raise InvalidParameter("eta_floor and sampler_retries must be non-negative")

    def rule(self, key: str) -> CountRule:
        if key not in COUNT_KEYS:
            raise InvalidParameter(f"unknown count key {key!r}")
        return self.rules.get(key, CountRule())

    def count(self, key: str, raw: float) -> int:
        return self.rule(key).apply(raw)

    def with_rules(self, **rules) -> Profile:
        merged = dict(self.rules)
        merged.update(rules)
        return replace(self, rules=merged)

    def to_json(self) -> dict:
        d = asdict(self)
        d["rules"] = {k: asdict(v) for k, v in self.rules.items()}
        return d

    @classmethod
    def from_json(cls, obj: dict) -> Profile:
        obj = dict(obj)
        rules = {k: CountRule(**v) for k, v in obj.pop("rules", {}).items()}
        return cls(rules=rules, **obj)


PAPER = Profile("paper")

RELAXED_DEFAULT = Profile(
    "relaxed-default",
    rules={
        "compare_queries": CountRule(1.0, 10**15),
        "en_T": CountRule(1e-3),
        "en_samples": CountRule(1.0, 10_000_000),
        "sampler_cap": CountRule(1.0, 2_000),
        "amp_T1": CountRule(1.0, 100_000),
        "amp_T2": CountRule(1.0, 2_000_000),
        "small_s1": CountRule(1.0, 20_000),
        "small_s2": CountRule(1.0, 20_000),
        "hist_samples": CountRule(1e-5),
    },
    eta_floor=0.1,
)

PROFILES = {"paper": PAPER, "relaxed-default": RELAXED_DEFAULT}


def get_profile(name_or_obj) -> Profile:
    if isinstance(name_or_obj, Profile):
        return name_or_obj
    if isinstance(name_or_obj, dict):
        return Profile.from_json(name_or_obj)
    try:
        return PROFILES[name_or_obj]
    except KeyError:
        raise InvalidParameter(f"unknown profile {name_or_obj!r}") from None
