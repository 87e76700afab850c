"""Counter-based random streams addressed by ``(seed, stream id)``."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

_MASK64 = (1 << 64) - 1


def derive_stream(parent: int, label: str | int) -> int:
    """Stable 64-bit child stream id for ``label`` under ``parent``."""
    h = hashlib.blake2b(f"{parent}:{label}".encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little")


@dataclass
class RngStream:
    """A Philox generator keyed by the 128-bit pair ``(seed, stream)``.

    Identical keys replay identical draws; distinct keys are independent
    streams of the same counter-based generator.
    """

    seed: int
    stream: int = 0
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        self.seed = int(self.seed) & _MASK64
        self.stream = int(self.stream) & _MASK64
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self.gen = np.random.Generator(np.random.Philox(key=key))

    def child(self, label: str | int) -> RngStream:
        return RngStream(self.seed, derive_stream(self.stream, label))

    # thin conveniences so callers rarely reach into ``gen``
    def random(self, size=None):
        return self.gen.random(size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size=size)
