"""Exact counting statistics over observation streams.

Everything here is defined through bit-exact float equality and is required
to agree with naive scan oracles; the implementations are vectorized
(sorting based) so they stay usable on 1e7-length streams.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


@dataclass
class StreamIndex:
    """Per-value occurrence summary of a stream."""

    values: np.ndarray     # sorted unique values
    inv: np.ndarray        # value id at each position
    counts: np.ndarray     # occurrences per value id
    first_pos: np.ndarray  # first occurrence position per value id
    last_pos: np.ndarray   # last occurrence position per value id

    @classmethod
    def build(cls, chi: np.ndarray) -> "StreamIndex":
        values, inv, counts = np.unique(chi, return_inverse=True, return_counts=True)
        n = chi.shape[0]
        first = np.empty(values.shape[0], dtype=np.int64)
        last = np.empty(values.shape[0], dtype=np.int64)
        pos = np.arange(n, dtype=np.int64)
        last[inv] = pos
        first[inv[::-1]] = pos[::-1]
        return cls(values=values, inv=inv, counts=counts, first_pos=first, last_pos=last)

    def value_mask(self, queries: np.ndarray) -> np.ndarray:
        """Boolean per value id: is the value one of ``queries``."""
        q = np.asarray(queries, dtype=float)
        if q.size == 0:
            return np.zeros(self.values.shape[0], dtype=bool)
        i = np.searchsorted(self.values, q)
        i = np.clip(i, 0, self.values.shape[0] - 1)
        out = np.zeros(self.values.shape[0], dtype=bool)
        out[i[self.values[i] == q]] = True
        return out


@dataclass
class HStats:
    """Repeat-frequency statistics of one value in a stream."""

    value: float
    h_single: float
    h_double: float
    h_triple: float
    h_cond_1: Optional[float]  # pair count / single count
    h_cond_2: Optional[float]  # triple count / pair count
    counts: dict = field(default_factory=dict)


def detect_atom_candidates_site(chi: np.ndarray) -> np.ndarray:
    """Values that ever appear twice in a row (the possible atoms)."""
    if chi.shape[0] < 2:
        return np.empty(0)
    adj = chi[1:] == chi[:-1]
    return np.unique(chi[:-1][adj])


def split_nonatom_values(chi: np.ndarray, candidates: np.ndarray,
                         min_repeats: int = 2,
                         index: Optional[StreamIndex] = None) -> tuple[np.ndarray, np.ndarray]:
    """Among non-candidate values: repeated ones come from the environment
    law's continuous part, single occurrences from the noise law."""
    if min_repeats < 2:
        raise ValueError("min_repeats must be >= 2")
    idx = index if index is not None else StreamIndex.build(chi)
    noncand = ~idx.value_mask(candidates)
    rho = idx.values[noncand & (idx.counts >= min_repeats)]
    nu = idx.values[noncand & (idx.counts == 1)]
    return rho, nu


def _last_pair_start(inv: np.ndarray, n_values: int) -> np.ndarray:
    """For each position k < N-1, the last start position of the same
    adjacent value pair (chi[k], chi[k+1]) anywhere in the stream."""
    code = inv[:-1].astype(np.int64) * np.int64(n_values) + inv[1:]
    order = np.argsort(code, kind="stable")
    sorted_code = code[order]
    new_group = np.empty(sorted_code.shape[0], dtype=bool)
    if sorted_code.shape[0]:
        new_group[0] = True
        new_group[1:] = sorted_code[1:] != sorted_code[:-1]
    gid = np.cumsum(new_group) - 1
    group_end = np.flatnonzero(np.append(new_group[1:], True))
    group_max = order[group_end]  # positions ascend within a group (stable sort)
    out = np.empty(code.shape[0], dtype=np.int64)
    out[order] = group_max[gid]
    return out


def marker_times_site(chi: np.ndarray, candidates: np.ndarray,
                      index: Optional[StreamIndex] = None) -> np.ndarray:
    """Times n right after passing a fresh two-value marker.

    Both chi(n-2) and chi(n-1) are non-candidates seen there for the first
    time, and the pair is read adjacently again later (so it belongs to the
    environment, not the noise)."""
    n = chi.shape[0]
    if n < 3:
        return np.empty(0, dtype=np.int64)
    idx = index if index is not None else StreamIndex.build(chi)
    cand_at = idx.value_mask(candidates)[idx.inv]
    fo = idx.first_pos[idx.inv]
    pos = np.arange(n, dtype=np.int64)
    fresh = fo == pos
    last_pair = _last_pair_start(idx.inv, idx.values.shape[0])
    ns = np.arange(2, n, dtype=np.int64)
    ok = (~cand_at[ns - 2]) & (~cand_at[ns - 1]) & fresh[ns - 2] & fresh[ns - 1]
    ok &= last_pair[ns - 2] >= ns + 1
    return ns[ok]


def marker_times_bond(chi: np.ndarray, candidates: np.ndarray,
                      index: Optional[StreamIndex] = None) -> np.ndarray:
    """Bond variant: a single fresh non-candidate value seen again later."""
    n = chi.shape[0]
    if n < 2:
        return np.empty(0, dtype=np.int64)
    idx = index if index is not None else StreamIndex.build(chi)
    cand_at = idx.value_mask(candidates)[idx.inv]
    pos = np.arange(n, dtype=np.int64)
    fresh = idx.first_pos[idx.inv] == pos
    lastpos = idx.last_pos[idx.inv]
    ns = np.arange(1, n, dtype=np.int64)
    ok = (~cand_at[ns - 1]) & fresh[ns - 1] & (lastpos[ns - 1] >= ns + 1)
    return ns[ok]


def fresh_observations(chi: np.ndarray, times: np.ndarray, nu_atoms: np.ndarray,
                       back_offset: int,
                       index: Optional[StreamIndex] = None,
                       return_times: bool = False) -> np.ndarray:
    """Observations right after a marker, kept only when the walker moved on
    (chi(n) differs from the pre-marker value) and the value recurs later.

    ``back_offset`` is 2 for site streams and 1 for bond streams."""
    if times.size == 0:
        empty = np.empty(0)
        return (empty, np.empty(0, dtype=np.int64)) if return_times else empty
    idx = index if index is not None else StreamIndex.build(chi)
    v = chi[times]
    lastpos = idx.last_pos[idx.inv]
    keep = (~idx.value_mask(nu_atoms)[idx.inv[times]])
    keep &= v != chi[times - back_offset]
    keep &= lastpos[times] > times
    if return_times:
        return v[keep], times[keep]
    return v[keep]


def fresh_observations_site(chi, times, nu_atoms, index=None, return_times=False):
    return fresh_observations(chi, times, nu_atoms, 2, index, return_times)


def fresh_observations_bond(chi, times, nu_atoms, index=None, return_times=False):
    return fresh_observations(chi, times, nu_atoms, 1, index, return_times)


def h_stats_site(chi: np.ndarray, alpha: float) -> HStats:
    """Single/double/triple adjacent-repeat frequencies of alpha."""
    n = chi.shape[0]
    m = chi == alpha
    single = int(m.sum())
    pairs = int((m[:-1] & m[1:]).sum()) if n >= 2 else 0
    triples = int((m[:-2] & m[1:-1] & m[2:]).sum()) if n >= 3 else 0
    return HStats(
        value=float(alpha),
        h_single=single / n if n else 0.0,
        h_double=pairs / (n - 1) if n >= 2 else 0.0,
        h_triple=triples / (n - 2) if n >= 3 else 0.0,
        h_cond_1=pairs / single if single else None,
        h_cond_2=triples / pairs if pairs else None,
        counts={"single": single, "pair": pairs, "triple": triples, "n": n},
    )


def h_stats_bond(chi: np.ndarray, alpha: float) -> HStats:
    """Bond variant; h_cond_1 is the empirical chance of another subsequent
    alpha given an alpha was just read."""
    return h_stats_site(chi, alpha)


def recurrence_diagnostic(chi: np.ndarray, repeat_threshold: int,
                          candidates: Optional[np.ndarray] = None,
                          index: Optional[StreamIndex] = None) -> str:
    """'recurrent' when some non-candidate value recurs often enough.

    A repeated non-candidate comes from the environment; seeing it many
    times witnesses returns of the walk."""
    idx = index if index is not None else StreamIndex.build(chi)
    cand = candidates if candidates is not None else detect_atom_candidates_site(chi)
    noncand = ~idx.value_mask(cand)
    hits = noncand & (idx.counts >= max(2, repeat_threshold))
    return "recurrent" if bool(hits.any()) else "undetermined"
