"""Reproducible random streams.

Every random decision in the library goes through a :class:`Stream`, which
is a thin wrapper around numpy's PCG64 bit generator keyed by a
``SeedSequence`` built from ``(seed, *keys)``. String keys are mapped to
64-bit integers with BLAKE2b so the key space is stable across processes
and platforms.

Only the raw 64-bit output of PCG64 is consumed; the derived draws are
defined here rather than relying on ``numpy.random.Generator`` methods,
whose streams numpy does not promise to keep stable:

* ``below(n)``: rejection sampling, accept ``r < 2**64 - (2**64 mod n)``,
  return ``r mod n``.
* ``uniform()``: ``(r >> 11) * 2**-53``, in [0, 1).

Test vectors for both live in ``tests/test_rng.py``.
"""

from __future__ import annotations

import functools
import hashlib
from typing import Union

import numpy as np

Key = Union[int, str]

_MASK64 = (1 << 64) - 1
_TWO64 = 1 << 64


@functools.lru_cache(maxsize=256)
def _hash_key(key: str) -> int:
    return int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")


def key_to_int(key: Key) -> int:
    if isinstance(key, str):
        return _hash_key(key)
    if int(key) != key or key < 0:
        raise ValueError(f"stream keys must be non-negative integers or strings, got {key!r}")
    return int(key)


def _seed_sequence(seed: int, keys: tuple[Key, ...]) -> np.random.SeedSequence:
    return np.random.SeedSequence([key_to_int(seed), *(key_to_int(k) for k in keys)])


def derive_seed(seed: int, *keys: Key) -> int:
    """A 64-bit child seed determined by ``seed`` and ``keys``."""
    return int(_seed_sequence(seed, keys).generate_state(1, np.uint64)[0])


class Stream:
    """A keyed PCG64 stream with pinned draw semantics."""

    def __init__(self, seed: int, *keys: Key):
        self._bits = np.random.PCG64(_seed_sequence(seed, keys))

    def raw(self) -> int:
        return int(self._bits.random_raw())

    def below(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n < 1:
            raise ValueError("below() needs n >= 1")
        if n == 1:
            return 0
        limit = _TWO64 - (_TWO64 % n)
        while True:
            r = int(self._bits.random_raw())
            if r < limit:
                return r % n

    def uniform(self) -> float:
        return (self.raw() >> 11) * (1.0 / (1 << 53))

    def uniform_array(self, size: int, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        r = self._bits.random_raw(size)
        u = (r >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))
        return low + (high - low) * u

    def sample(self, population: int, k: int) -> list[int]:
        """``k`` distinct integers from [0, population), via a partial Fisher-Yates shuffle."""
        if not 0 <= k <= population:
            raise ValueError(f"cannot sample {k} of {population}")
        pool = list(range(population))
        for i in range(k):
            j = i + self.below(population - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
