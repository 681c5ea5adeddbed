"""Named random sub-streams derived from a single 64-bit seed."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

STREAM_NAMES = ("gamma", "signs", "emptiness", "descent", "zdraws")


def _stream(seed: int, name: str) -> np.random.Generator:
    # keyed by name, not by spawn order, so adding a stream never shifts the others
    key = zlib.crc32(name.encode())
    return np.random.default_rng(np.random.SeedSequence([seed & (2**64 - 1), key]))


@dataclass
class Streams:
    """One generator per randomized component.

    gamma: row sample of the guess phase; signs: sign vectors of identity
    tests; emptiness: random subsets of the subset-size estimator; descent:
    coin flips of the hierarchical sampler; zdraws: per-bucket resampling.
    """

    gamma: np.random.Generator
    signs: np.random.Generator
    emptiness: np.random.Generator
    descent: np.random.Generator
    zdraws: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "Streams":
        return cls(**{name: _stream(seed, name) for name in STREAM_NAMES})


def as_streams(source: "Streams | int | None") -> Streams:
    if isinstance(source, Streams):
        return source
    if source is None:
        source = int(np.random.SeedSequence().entropy % 2**64)
    return Streams.from_seed(int(source))
