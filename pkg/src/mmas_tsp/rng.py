"""Counter-based random streams.

A stream is a 64-bit key derived from (seed, stream_id); draw k of the stream
is the SplitMix64 finalizer applied to key + (k + 1) * GOLDEN. Any draw can be
computed directly from its counter, which is what lets parallel WRS assign
random values by candidate index instead of by scheduling order.
"""

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_SEED_SALT = np.uint64(0xD1B54A32D192ED03)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S12 = np.uint64(12)
_ONE = np.uint64(1)
_INV_2_52 = 1.0 / 4503599627370496.0


@njit(cache=True, nogil=True)
def mix64(z):
    z = np.uint64(z)
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def stream_key(seed, stream_id):
    return mix64(mix64(np.uint64(seed) ^ _SEED_SALT) + np.uint64(stream_id) * GOLDEN)


@njit(cache=True, nogil=True)
def draw_u64(key, counter):
    return mix64(np.uint64(key) + (np.uint64(counter) + _ONE) * GOLDEN)


@njit(cache=True, nogil=True)
def to_unit_open(x):
    # 52 high bits plus a half step: strictly inside (0, 1), and every value
    # is exact (with 53 bits the top value would round up to 1.0)
    return ((x >> _S12) + 0.5) * _INV_2_52


@njit(cache=True, nogil=True)
def draw_unit(key, counter):
    return to_unit_open(draw_u64(key, counter))


def ant_stream_id(ant: int, iteration: int) -> int:
    return (int(iteration) << 32) | int(ant)


class RandomStream:
    """Deterministic stream of uniforms in (0, 1) identified by (seed, stream_id)."""

    def __init__(self, seed: int, stream_id: int = 0, counter: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream_id = int(stream_id) & 0xFFFFFFFFFFFFFFFF
        self.counter = int(counter)
        self.key = int(stream_key(np.uint64(self.seed), np.uint64(self.stream_id)))

    def next_u64(self) -> int:
        x = int(draw_u64(np.uint64(self.key), np.uint64(self.counter)))
        self.counter += 1
        return x

    def next_unit_open(self) -> float:
        u = float(draw_unit(np.uint64(self.key), np.uint64(self.counter)))
        self.counter += 1
        return u

    def peek_unit(self, offset: int) -> float:
        """Draw at counter + offset without advancing."""
        return float(draw_unit(np.uint64(self.key), np.uint64(self.counter + offset)))

    def advance(self, k: int) -> None:
        self.counter += int(k)

    def copy(self) -> "RandomStream":
        return RandomStream(self.seed, self.stream_id, self.counter)

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"
