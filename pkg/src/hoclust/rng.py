"""Hierarchical, counter-based random streams.

Every random draw in the package comes from a ``numpy.random.Generator``
backed by Philox, keyed by a master seed and a path of stream ids
(experiment -> cell -> trial -> draw site).  Two streams with the same
``(seed, path)`` produce the same sequence on every platform, regardless of
the order in which they are created or consumed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RngStream:
    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if any(p < 0 for p in self.path):
            raise ValueError("stream ids must be non-negative")

    def child(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.path + tuple(int(i) for i in ids))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    def lineage(self) -> str:
        return "/".join([str(self.seed)] + [str(p) for p in self.path])


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngStream, an int seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")
