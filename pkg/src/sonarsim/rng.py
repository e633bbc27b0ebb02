"""Counter-based random streams.

Every draw is a pure function of ``(key words, counter, lane)``, so results do
not depend on iteration order or on how work is split between workers.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix_int(z: int) -> int:
    z = (z + _GOLDEN) & _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix(z: np.ndarray) -> np.ndarray:
    z = z + np.uint64(_GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key(*words: int) -> int:
    """Fold integer words (seed, frame index, purpose tag...) into one key."""
    h = 0
    for w in words:
        h = _mix_int(h ^ (int(w) & _MASK))
    return h


def uniforms(key: int, counters, lane: int = 0) -> np.ndarray:
    """Uniform draws in the open interval (0, 1), one per counter."""
    c = np.asarray(counters).astype(np.uint64)
    k = np.uint64(_mix_int(key ^ ((lane * 0xD1B54A32D192ED03) & _MASK)))
    h = _mix(_mix(c ^ k) + k)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53


def normals(key: int, counters, lane: int = 0) -> np.ndarray:
    """Standard normal draws (Box-Muller over two uniform lanes)."""
    u1 = uniforms(key, counters, 2 * lane)
    u2 = uniforms(key, counters, 2 * lane + 1)
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
