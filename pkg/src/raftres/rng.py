"""Counter-based random streams usable from both Python and compiled kernels.

A stream is a ``uint64[2]`` array ``(key, counter)``.  Draw ``i`` of a stream
is ``mix(key ^ mix(counter_i * GOLDEN))`` so sibling streams never share
state, and a child stream is obtained by hashing a parent key with an index.
Root keys come from :class:`numpy.random.SeedSequence`, so ``(seed, *ids)``
identifies a stream uniquely.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_ONE = np.uint64(1)
_TWO53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def next_u64(rng):
    c = rng[1] + _ONE
    rng[1] = c
    return mix64(rng[0] ^ mix64(c * _GOLDEN))


@njit(cache=True, nogil=True)
def next_uniform(rng):
    """Uniform draw on the open interval (0, 1)."""
    return ((next_u64(rng) >> _S11) + 0.5) * _TWO53


@njit(cache=True, nogil=True)
def derive_key(key, index):
    return mix64(key ^ mix64(np.uint64(index) * _GOLDEN + _GOLDEN))


def derive(key, index) -> np.uint64:
    """Python-side :func:`derive_key` accepting plain ints."""
    return derive_key(np.uint64(int(key) & 0xFFFFFFFFFFFFFFFF), np.uint64(int(index)))


def root_key(seed: int, *ids: int) -> np.uint64:
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(i) for i in ids))
    return seq.generate_state(1, dtype=np.uint64)[0]


class RngStream:
    """A single-owner random stream.  Not safe to share between traces."""

    __slots__ = ("state",)

    def __init__(self, key):
        self.state = np.array([key, 0], dtype=np.uint64)

    @classmethod
    def from_seed(cls, seed: int, *ids: int) -> "RngStream":
        return cls(root_key(seed, *ids))

    @property
    def key(self) -> np.uint64:
        return self.state[0]

    def spawn(self, index: int) -> "RngStream":
        """Independent child stream; same parent key and index give the same child."""
        return RngStream(derive(self.state[0], index))

    def uniform(self) -> float:
        return float(next_uniform(self.state))

    def copy(self) -> "RngStream":
        out = RngStream(self.state[0])
        out.state[1] = self.state[1]
        return out

    def __repr__(self):
        return f"RngStream(key={int(self.state[0]):#018x}, counter={int(self.state[1])})"
