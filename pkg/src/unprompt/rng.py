"""Named, counter-based random streams.

Every consumer of randomness asks for a stream by purpose (``"init"``,
``"data"``, ``"t"``, ``"eps"``, ``"eval"``, ...).  Each stream is a Philox
generator keyed by a hash of ``(master_seed, purpose, *extra)``, so streams
never overlap and adding a new consumer never perturbs existing ones.
"""
from __future__ import annotations

import hashlib

import numpy as np

PURPOSES = ("init", "data", "t", "eps", "remember", "eval", "surrogate")


def stream_key(master_seed: int, purpose: str, *extra) -> int:
    path = "/".join([str(int(master_seed)), purpose, *map(str, extra)])
    digest = hashlib.sha256(path.encode()).digest()
    return int.from_bytes(digest[:16], "little")


def stream(master_seed: int, purpose: str, *extra) -> np.random.Generator:
    """Return an independent Philox generator for ``purpose``."""
    return np.random.Generator(np.random.Philox(key=stream_key(master_seed, purpose, *extra)))


class Streams:
    """Lazily created per-purpose generators derived from one master seed."""

    def __init__(self, master_seed: int):
        self.master_seed = int(master_seed)
        self._cache: dict[tuple, np.random.Generator] = {}

    def __getitem__(self, purpose) -> np.random.Generator:
        key = purpose if isinstance(purpose, tuple) else (purpose,)
        if key not in self._cache:
            self._cache[key] = stream(self.master_seed, *key)
        return self._cache[key]

    def child(self, *extra) -> "Streams":
        return Streams(stream_key(self.master_seed, "child", *extra) % (2**63))
