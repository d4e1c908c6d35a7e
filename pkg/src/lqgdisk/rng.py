"""Reproducible stream splitting for Monte Carlo replicas.

All randomness flows from one 64-bit master seed.  Substreams are produced by
a counter-based scheme (Philox) keyed by ``(master seed, module tag, replica,
attempt)``, so replicas can run in any order and on any number of workers and
still produce bit-identical output.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix(tag: str, *counters: int) -> int:
    """Collapse a module tag and counters into a stable 64-bit key."""
    h = hashlib.blake2b(digest_size=8)
    h.update(tag.encode("utf-8"))
    for c in counters:
        h.update(int(c).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def substream(seed: int, tag: str, replica: int = 0, attempt: int = 0) -> np.random.Generator:
    """Independent generator for one (module, replica, attempt) cell.

    Streams for distinct keys never collide: the Philox key is
    (seed, blake2(tag, replica, attempt)).
    """
    key = np.array([int(seed) & _MASK64, _mix(tag, replica, attempt)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
