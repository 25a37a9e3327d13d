"""Counter-based keyed random streams.

Every random quantity in a market is a pure function of
``(seed, role, a, j, counter)``.  The key is folded through the splitmix64
finalizer, so draws are independent of evaluation order and can be computed
in vectorized blocks or one at a time with identical results.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK64 = (1 << 64) - 1

# role tags; values are arbitrary but frozen (changing them changes every market)
ROLE_B_APP = 1
ROLE_B_FIRM = 2
ROLE_A_APP = 3
ROLE_A_FIRM = 4
ROLE_JITTER_APP = 5
ROLE_JITTER_FIRM = 6
ROLE_TYPE_APP = 7
ROLE_GRAPH = 8
ROLE_INTERNAL = 9


def _mix(x: np.ndarray) -> np.ndarray:
    x = x + _GOLDEN
    x = (x ^ (x >> np.uint64(30))) * _M1
    x = (x ^ (x >> np.uint64(27))) * _M2
    return x ^ (x >> np.uint64(31))


def _as_u64(v) -> np.ndarray:
    if isinstance(v, (int, np.integer)):
        return np.uint64(int(v) & _MASK64)
    arr = np.asarray(v)
    if arr.dtype.kind == "u":
        return arr.astype(np.uint64)
    if arr.dtype.kind != "i":
        raise TypeError(f"stream keys must be integers, got dtype {arr.dtype}")
    return arr.astype(np.int64).view(np.uint64)


def hash64(seed: int, role: int, a, j, counter=0) -> np.ndarray:
    """Vectorized 64-bit hash of the key tuple (broadcasts over a, j, counter)."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(int(seed) & _MASK64) ^ np.uint64(0))
        h = _mix(h ^ np.uint64(role))
        h = _mix(h ^ _as_u64(a))
        h = _mix(h ^ _as_u64(j))
        h = _mix(h ^ _as_u64(counter))
    return h


def keyed_uniform(seed: int, role: int, a, j, counter=0) -> np.ndarray:
    """Uniform draws strictly inside (0, 1), 53-bit resolution."""
    h = hash64(seed, role, a, j, counter)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * (1.0 / 9007199254740992.0)


def mix_seed(*parts: int) -> int:
    """Stable 64-bit combination of integers (used for per-trial seed derivation)."""
    with np.errstate(over="ignore"):
        h = np.uint64(0x6A09E667F3BCC909)
        for p in parts:
            h = _mix(h ^ np.uint64(int(p) & _MASK64))
    return int(h)
