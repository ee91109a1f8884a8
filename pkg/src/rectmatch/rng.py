"""Reproducible 64-bit random streams.

xoshiro256** seeded through SplitMix64, in two flavours that produce the
same numbers: :class:`Xoshiro256` (one stream, pure Python ints) and
:class:`XoshiroBatch` (one independent stream per lane, numpy ``uint64``
arrays, used to run many trials side by side).

Per-trial streams are seeded with ``derive_seed(master, trial_index)`` so
every trial is reproducible on its own, independent of how trials are
grouped across workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def splitmix64(state: int) -> tuple[int, int]:
    """Advance a SplitMix64 state once; return ``(new_state, output)``."""
    state = (state + _GOLDEN) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return state, z ^ (z >> 31)


def derive_seed(master: int, index: int) -> int:
    """Seed for sub-stream ``index``: one SplitMix64 step from ``master ^ index``."""
    return splitmix64((master ^ index) & MASK64)[1]


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256:
    """Single xoshiro256** stream."""

    def __init__(self, seed: int):
        if not 0 <= seed <= MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        sm = seed
        s = []
        for _ in range(4):
            sm, out = splitmix64(sm)
            s.append(out)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & MASK64, 7) * 9) & MASK64
        t = (s1 << 17) & MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double on [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * _INV53

    def bit(self) -> int:
        """Fair coin from the top bit."""
        return self.next_u64() >> 63

    def below(self, k: int) -> int:
        """Uniform integer in ``range(k)`` (multiply-shift, bias < k / 2**64)."""
        return (self.next_u64() * k) >> 64


def _u64(values) -> np.ndarray:
    return np.asarray(values, dtype=np.uint64)


_GOLDEN_U = np.uint64(_GOLDEN)
_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)


def splitmix64_array(state: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`splitmix64`."""
    state = state + _GOLDEN_U
    z = state
    z = (z ^ (z >> np.uint64(30))) * _MIX1_U
    z = (z ^ (z >> np.uint64(27))) * _MIX2_U
    return state, z ^ (z >> np.uint64(31))


def derive_seeds(master: int, indices) -> np.ndarray:
    """Vectorised :func:`derive_seed` over an index array."""
    idx = _u64(indices)
    return splitmix64_array(idx ^ np.uint64(master))[1]


def _rotl_array(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


class XoshiroBatch:
    """Independent xoshiro256** streams, one per lane, advanced in lockstep."""

    def __init__(self, seeds):
        sm = _u64(seeds).copy()
        lanes = []
        for _ in range(4):
            sm, out = splitmix64_array(sm)
            lanes.append(out)
        self._s = lanes

    def __len__(self) -> int:
        return len(self._s[0])

    def next_u64(self) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        result = _rotl_array(s1 * np.uint64(5), 7) * np.uint64(9)
        t = s1 << np.uint64(17)
        s2 = s2 ^ s0
        s3 = s3 ^ s1
        s1 = s1 ^ s2
        s0 = s0 ^ s3
        s2 = s2 ^ t
        s3 = _rotl_array(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> np.ndarray:
        return (self.next_u64() >> np.uint64(11)).astype(np.float64) * _INV53

    def bit(self) -> np.ndarray:
        return (self.next_u64() >> np.uint64(63)).astype(np.int8)
