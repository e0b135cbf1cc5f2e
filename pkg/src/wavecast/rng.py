"""Reproducible random streams.

Every generator in the package draws from a Philox-4x64 counter-based bit
generator keyed by ``(seed, *labels)``.  Labels are hashed with CRC-32 into the
``SeedSequence`` spawn key, so two streams with different labels never overlap
and the same ``(seed, labels)`` always yields the same raw 64-bit words.

Gaussian variates are produced by a Box-Muller transform on the raw words
rather than by numpy's ziggurat sampler, whose output stream is not promised to
stay fixed across numpy releases.
"""
from __future__ import annotations

import zlib

import numpy as np

_TWO_POW_M53 = 2.0 ** -53


def _label_key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFF
    return zlib.crc32(str(label).encode("utf-8"))


class Stream:
    """A labelled random stream (uniforms and Gaussians only)."""

    def __init__(self, seed: int, *labels):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.labels = tuple(labels)
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(_label_key(l) for l in labels))
        self._bitgen = np.random.Philox(ss)

    def child(self, *labels) -> "Stream":
        return Stream(self.seed, *self.labels, *labels)

    def _raw(self, count: int) -> np.ndarray:
        return self._bitgen.random_raw(count).astype(np.uint64)

    def uniform(self, size=None) -> np.ndarray:
        """Uniform draws in the half-open interval (0, 1]."""
        shape = () if size is None else np.atleast_1d(size)
        count = int(np.prod(shape)) if size is not None else 1
        raw = self._raw(count)
        u = ((raw >> np.uint64(11)).astype(np.float64) + 1.0) * _TWO_POW_M53
        return u.reshape(tuple(shape)) if size is not None else u[0]

    def normal(self, size=None) -> np.ndarray:
        shape = () if size is None else tuple(np.atleast_1d(size))
        count = int(np.prod(shape)) if size is not None else 1
        pairs = (count + 1) // 2
        u1 = self.uniform(pairs)
        u2 = self.uniform(pairs)
        rad = np.sqrt(-2.0 * np.log(u1))
        ang = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = rad * np.cos(ang)
        z[1::2] = rad * np.sin(ang)
        z = z[:count]
        return z.reshape(shape) if size is not None else z[0]


def stream(seed: int, *labels) -> Stream:
    return Stream(seed, *labels)
