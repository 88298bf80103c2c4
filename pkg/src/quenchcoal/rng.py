"""Seeded random streams.

Every stream is a Philox generator keyed by a 64-bit seed and a tuple of
integers or tags. Tags are hashed with CRC-32, so a substream is fully
described by ``(seed, key...)``::

    SeedSequence(entropy=seed, spawn_key=(k1, k2, ...))

with string components replaced by ``zlib.crc32(tag.encode())``.
"""
from __future__ import annotations

import zlib

import numpy as np


def _word(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    key = int(key)
    if key < 0:
        raise ValueError("stream keys must be non-negative")
    return key


def substream(seed: int, *key) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_word(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator or an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("a seed or generator is required")
    return substream(int(rng))


def child_seed(rng) -> int:
    """Draw a 63-bit seed from a generator."""
    return int(as_generator(rng).integers(0, 2**63 - 1))
