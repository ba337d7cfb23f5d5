"""Deterministic random streams.

Every random draw in the library flows from an explicit 64-bit seed through
``stream(seed, *path)``.  The seed and the path integers are mixed with
SplitMix64 into a Philox4x64 key, so each (seed, path) pair names an
independent counter-based stream.  Streams depend only on their key, never on
draw order elsewhere in the program, which is what makes parallel training
bit-identical to serial: each tree / round / column owns its own stream.

The scheme (SplitMix64 chain over the path, Philox4x64 bit generator) is part
of the file-format and reproducibility contract: a published seed reproduces
the same records, models and scores on any platform.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 mixing step (Steele et al.), on 64-bit wrapping ints."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def stream_key(seed: int, *path: int) -> int:
    key = splitmix64(seed & _MASK64)
    for p in path:
        key = splitmix64(key ^ (p & _MASK64))
    return key


def stream(seed: int, *path: int) -> np.random.Generator:
    """Independent Philox stream for (seed, path)."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *path)))
