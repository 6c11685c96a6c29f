"""Stateless, content-keyed randomness.

All live randomness in the platform is derived from (seed, purpose, state)
keys instead of shared RNG streams.  That keeps decisions reproducible under
replay and independent of request interleaving.
"""

from __future__ import annotations

import hashlib
import random


def _digest(parts: tuple) -> bytes:
    joined = "\x1f".join(str(p) for p in parts)
    return hashlib.sha256(joined.encode("utf-8")).digest()


def derived_rng(*parts) -> random.Random:
    """A fresh RNG seeded from the hash of the given key parts."""
    return random.Random(int.from_bytes(_digest(parts)[:8], "big"))


def unit_float(*parts) -> float:
    """Deterministic float in [0, 1) keyed on the given parts."""
    return int.from_bytes(_digest(parts)[:7], "big") / float(1 << 56)
