"""Seeded substreams.

Every random draw in the package comes from a Philox (counter-based) generator
keyed by a tuple ``(seed, *path)``. Two calls with the same key produce the same
stream no matter which thread or process runs them, so Monte Carlo sweeps are
reproducible bit-for-bit regardless of scheduling.

Gaussian variates come from numpy's ``standard_normal`` (ziggurat). Ports to
other languages should match distributionally, not bitwise.
"""

from __future__ import annotations

import zlib

import numpy as np

# stable integer tags for named substreams
_TAGS: dict[str, int] = {}


def _tag(name: str) -> int:
    if name not in _TAGS:
        _TAGS[name] = zlib.crc32(name.encode())
    return _TAGS[name]


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Return an independent generator for ``(seed, *path)``.

    String path components are hashed to stable 32-bit tags, so
    ``substream(3, "oracle", 7)`` is the 7th oracle query stream of seed 3.
    """
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for p in path:
        key.append(_tag(p) if isinstance(p, str) else int(p))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))
