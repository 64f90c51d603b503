"""Splittable random streams.

Every random stream in the package is a numpy Philox generator keyed by a
hash of ``(master seed, *path)``.  Workers and work items derive independent
streams from their indices, so results do not depend on scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream"]


def _key(seed: int, path: tuple) -> np.ndarray:
    h = hashlib.blake2b(digest_size=16)
    h.update(str(int(seed)).encode())
    for part in path:
        h.update(b"/")
        # repr keeps 1 and "1" distinct as path components
        h.update(repr(part).encode())
    return np.frombuffer(h.digest(), dtype=np.uint64)


def stream(seed: int, *path) -> np.random.Generator:
    """Independent generator for (seed, *path); path parts are ints or strings."""
    return np.random.Generator(np.random.Philox(key=_key(seed, path)))
