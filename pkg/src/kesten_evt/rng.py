"""Counter-based random streams.

Every operation takes an explicit ``RngStream``.  Streams are keyed by a
``(seed, stream_id)`` pair fed into a Philox counter-based generator, so

* identical pairs reproduce bit-identical draws, and
* distinct pairs give streams that are independent by construction,

which is what makes replica-parallel runs deterministic regardless of
scheduling: task ``i`` always works on ``stream.child(i)`` and reductions
happen in index order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z: int) -> int:
    """Finalizer of the splitmix64 generator; bijective 64-bit mixing."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


@dataclass(frozen=True)
class RngStream:
    """Identifier of one reproducible random stream."""

    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream."""
        return np.random.Generator(
            np.random.Philox(key=np.array([self.seed, self.stream_id], dtype=np.uint64))
        )

    def child(self, index: int) -> "RngStream":
        """Substream for replica/task ``index``; independent of siblings."""
        return RngStream(self.seed, _splitmix64(self.stream_id ^ _splitmix64(index)))

    def domain(self, tag: int) -> "RngStream":
        """Stream decorrelated by a 64-bit namespace tag (e.g. a model's seed_domain)."""
        return RngStream(self.seed ^ _splitmix64(tag ^ 0xD1B54A32D192ED03), self.stream_id)
