"""Counter-based random streams.

Every stream is a Philox generator whose 128-bit key is the pair
``(seed, stream)``.  Two streams with different keys are independent and a
stream is fully reproducible from its key, which lets Monte Carlo paths be
fanned out in any order.
"""
from __future__ import annotations

import numpy as np

CHUNK = 1 << 16
_MASK = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & _MASK, int(stream) & _MASK], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_chunks(seed: int, stream: int, total: int, chunk: int = CHUNK):
    """Yield float64 uniforms on [0, 1) for ``(seed, stream)``, ``total`` in all.

    Chunk boundaries do not affect the values: the concatenation is the
    same as one ``random(total)`` call.
    """
    rng = make_rng(seed, stream)
    left = int(total)
    while left > 0:
        k = min(chunk, left)
        yield rng.random(k)
        left -= k
