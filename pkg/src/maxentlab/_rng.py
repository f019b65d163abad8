"""Deterministic random sub-streams derived from a single 64-bit seed.

Every randomized routine in the package draws from a named sub-stream
keyed by ``(seed, index)``.  Sub-streams are counter-based (Philox), so
work can be partitioned across threads in any order and still produce
bit-identical results.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def substream(seed: int, index: int) -> np.random.Generator:
    """Return the generator for sub-stream ``index`` of ``seed``."""
    key = np.array([seed & _MASK64, index & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
