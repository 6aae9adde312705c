"""Lazily realized i.i.d. environment over the integers.

The value at site z is a pure function of (seed, z, law): each site owns a
Philox stream keyed by (seed, z), so query order never matters and two-sided
exploration stays reproducible.
"""

from __future__ import annotations

from bisect import bisect_right

import numpy as np

from .distributions import DistributionSpec
from .errors import SupportViolation

_MASK64 = (1 << 64) - 1


class Environment:
    """One realization of the i.i.d. field, memoized site by site."""

    def __init__(self, spec: DistributionSpec, seed: int):
        self.spec = spec.validate()
        self.seed = int(seed) & _MASK64
        self.realized: dict[int, float] = {}
        # flattened mixture table for the scalar sampling path
        edges = [0.0]
        comps: list[tuple[float, float]] = []
        for v, w in spec.atoms:
            edges.append(edges[-1] + w)
            comps.append((v, v))
        for a, b, w in spec.uniforms:
            edges.append(edges[-1] + w)
            comps.append((a, b))
        self._edges = edges
        self._comps = comps
        self._lo, self._hi = spec.support_interval

    def value(self, z: int) -> float:
        v = self.realized.get(z)
        if v is None:
            v = self._draw(z)
            self.realized[z] = v
        return v

    def window(self, lo: int, hi: int) -> np.ndarray:
        """Values on sites lo..hi inclusive."""
        return np.array([self.value(z) for z in range(lo, hi + 1)])

    def _draw(self, z: int) -> float:
        key = np.array([self.seed, z & _MASK64], dtype=np.uint64)
        u = np.random.Generator(np.random.Philox(key=key)).random(2)
        i = min(bisect_right(self._edges, u[0]) - 1, len(self._comps) - 1)
        a, b = self._comps[i]
        v = a if a == b else a + u[1] * (b - a)
        if not (self._lo < v < self._hi):
            raise SupportViolation(f"drawn value {v} at site {z} leaves ({self._lo}, {self._hi})")
        return v
