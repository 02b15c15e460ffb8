"""Schedule-independent seed derivation.

Every random stage draws from a generator keyed on (master seed, stage name,
indices), so results never depend on call order or worker count.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        value = int(part)
        if value < 0:
            raise ValueError(f"seed components must be non-negative, got {value}")
        return value
    if isinstance(part, float):
        return zlib.crc32(repr(part).encode("ascii"))
    raise TypeError(f"unsupported seed component {part!r}")


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Return a generator for ``(seed, *keys)``; strings are hashed with CRC32."""
    return np.random.default_rng([_key(seed), *(_key(k) for k in keys)])


def derive_seed(seed: int, *keys) -> int:
    """Derive a 63-bit integer seed, for APIs that want a plain int."""
    return int(derive_rng(seed, *keys).integers(0, 2**63 - 1))
