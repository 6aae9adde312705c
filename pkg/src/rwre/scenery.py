"""Reconstruction of the environment itself, up to translation.

Values classified as environment realizations sit at almost-surely unique
sites, so the shortest observation string between two of them reads off the
environment in between.  Gluing such strings anchor by anchor rebuilds a
contiguous window of the field.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._kernels import longest_match_at_shift
from .counting import StreamIndex
from .distributions import Situation
from .environment import Environment
from .errors import (
    AllCorrupted,
    InsufficientAnchors,
    NoCrossing,
    NoDistinguishingSite,
    PreconditionViolation,
)
from .law import ReconstructionReport, reconstruct_law


@dataclass
class CrossingString:
    start_index: int
    values: np.ndarray
    endpoints: tuple[float, float]
    clean: bool = True


@dataclass
class ReconstructedEnvironment:
    values: np.ndarray
    anchor_value: float
    anchor_offset: int
    oriented: bool = False
    orientation_evidence: dict = field(default_factory=dict)
    anomalies: list = field(default_factory=list)


def shortest_crossings(chi: np.ndarray, w1: float, w2: float) -> list[CrossingString]:
    """All minimal-length strings chi[n..n+l] with chi[n]=w1, chi[n+l]=w2."""
    if w1 == w2:
        raise PreconditionViolation("crossing endpoints must differ")
    chi = np.asarray(chi, dtype=float)
    p1 = np.flatnonzero(chi == w1)
    p2 = np.flatnonzero(chi == w2)
    if p1.size == 0 or p2.size == 0 or p2[-1] <= p1[0]:
        raise NoCrossing(f"{w2!r} never follows {w1!r}")
    j = np.searchsorted(p2, p1, side="right")
    ok = j < p2.size
    if not ok.any():
        raise NoCrossing(f"{w2!r} never follows {w1!r}")
    lmin = int((p2[j[ok]] - p1[ok]).min())
    cand = p1[p1 + lmin < chi.shape[0]]
    starts = cand[chi[cand + lmin] == w2]
    return [CrossingString(int(s), chi[s:s + lmin + 1].copy(), (w1, w2))
            for s in starts]


def filter_clean(strings: list[CrossingString], rho_values: np.ndarray) -> list[CrossingString]:
    """Keep only strings whose interior values all come from the environment."""
    rho_values = np.asarray(rho_values, dtype=float)
    out = []
    for s in strings:
        interior = s.values[1:-1]
        clean = bool(np.isin(interior, rho_values).all()) if interior.size else True
        if clean:
            out.append(CrossingString(s.start_index, s.values, s.endpoints, True))
    if not out:
        raise AllCorrupted("every minimal crossing string contains noise values")
    return out


class _PairScanner:
    """shortest_crossings + filter_clean for many value pairs on one stream.

    Precomputes per-value position lists and a corruption prefix sum so each
    pair query costs O(occurrences) instead of a full-stream scan; the result
    is identical to filter_clean(shortest_crossings(chi, w1, w2), rho)[0].
    """

    def __init__(self, chi: np.ndarray, idx: StreamIndex, rho_values: np.ndarray):
        self.chi = chi
        self.idx = idx
        self._order = np.argsort(idx.inv, kind="stable")
        self._bounds = np.concatenate([[0], np.cumsum(idx.counts)])
        bad = ~idx.value_mask(rho_values)[idx.inv]
        self._badcum = np.concatenate([[0], np.cumsum(bad)])

    def positions(self, v: float) -> np.ndarray:
        i = int(np.searchsorted(self.idx.values, v))
        return self._order[self._bounds[i]:self._bounds[i + 1]]

    def clean_crossing(self, w1: float, w2: float, anomalies: list) -> Optional[CrossingString]:
        """First clean minimal crossing from w1 to w2, or None."""
        p1 = self.positions(w1)
        p2 = self.positions(w2)
        j = np.searchsorted(p2, p1, side="right")
        ok = j < p2.size
        if not ok.any():
            return None
        lmin = int((p2[j[ok]] - p1[ok]).min())
        cand = p1[p1 + lmin < self.chi.shape[0]]
        starts = cand[self.chi[cand + lmin] == w2]
        # interior [s+1, s+lmin-1] must contain no non-environment value
        clean = (self._badcum[starts + lmin] - self._badcum[starts + 1]) == 0
        starts = starts[clean]
        if starts.size == 0:
            return None
        if starts.size > 1:
            windows = self.chi[starts[:, None] + np.arange(lmin + 1)]
            n_var = np.unique(windows, axis=0).shape[0]
            if n_var > 1:
                anomalies.append({"kind": "ambiguous_crossing", "endpoints": (w1, w2),
                                  "variants": int(n_var)})
        s = int(starts[0])
        return CrossingString(s, self.chi[s:s + lmin + 1].copy(), (w1, w2), True)


def assemble(chi: np.ndarray, report: ReconstructionReport,
             max_extent: int = 64) -> ReconstructedEnvironment:
    """Two-sided assembly from shortest crossings between fresh anchors.

    Anchors are the continuous environment values in order of first
    appearance.  A step is discarded when the new string runs through the
    opposite end of the current piece (the anchor sits on the other side)
    or when no clean minimal string exists.
    """
    chi = np.asarray(chi, dtype=float)
    anchors = np.asarray(report.rho_continuous_values, dtype=float)
    if anchors.size < 2:
        raise InsufficientAnchors(
            f"need at least 2 continuous environment values, found {anchors.size}")
    idx = StreamIndex.build(chi)
    first = idx.first_pos[np.searchsorted(idx.values, anchors)]
    anchors = anchors[np.argsort(first)]
    rho_values = report.rho_value_set()
    anomalies: list = []
    scanner = _PairScanner(chi, idx, np.asarray(rho_values, dtype=float))

    piece: Optional[np.ndarray] = None
    anchor_value = float(anchors[0])
    queue = list(map(float, anchors[1:]))
    # initial segment: first anchor against the earliest partner that works
    for k, a2 in enumerate(queue):
        s = scanner.clean_crossing(anchor_value, a2, anomalies)
        if s is None:
            s = scanner.clean_crossing(a2, anchor_value, anomalies)
        if s is not None:
            piece = s.values.copy()
            queue = queue[:k] + queue[k + 1:]
            break
    if piece is None:
        raise InsufficientAnchors("no clean crossing between any initial anchor pair")

    deferred: list[float] = []
    for side in ("right", "left"):
        added = 0
        pending = queue if side == "right" else deferred
        leftovers: list[float] = []
        while pending and added < max_extent:
            a = pending.pop(0)
            if (piece == a).any():
                continue
            if side == "right":
                s = scanner.clean_crossing(float(piece[-1]), a, anomalies)
                opposite = piece[0]
            else:
                s = scanner.clean_crossing(a, float(piece[0]), anomalies)
                opposite = piece[-1]
            if s is None:
                leftovers.append(a)
                continue
            if (s.values[1:-1] == opposite).any() or s.values[-1 if side == "right" else 0] == opposite:
                # the new anchor lies beyond the other end of the piece
                leftovers.append(a)
                continue
            if side == "right":
                piece = np.concatenate([piece, s.values[1:]])
                added += s.values.shape[0] - 1
            else:
                piece = np.concatenate([s.values[:-1], piece])
                added += s.values.shape[0] - 1
        if side == "right":
            deferred = leftovers + deferred
        queue = []

    anchor_offset = int(np.flatnonzero(piece == anchor_value)[0])
    return ReconstructedEnvironment(values=piece, anchor_value=anchor_value,
                                    anchor_offset=anchor_offset, anomalies=anomalies)


def orient(recon: ReconstructedEnvironment, chi: np.ndarray,
           situation: Situation) -> ReconstructedEnvironment:
    """Fix the left-right order using the drift at a distinguishing site.

    Site case: at a site with value v != 1/2 the walker steps right with
    probability v; tally which reconstructed neighbor follows readings of v.
    Bond case: between two unequal conductances the walker crosses the larger
    one more often; tally transitions between the two edge readings.
    """
    chi = np.asarray(chi, dtype=float)
    vals = recon.values
    if situation is Situation.SITE:
        interior = vals[1:-1] if vals.shape[0] >= 3 else np.empty(0)
        if interior.size == 0 or not (interior != 0.5).any():
            raise NoDistinguishingSite("no interior site with value != 1/2")
        j = 1 + int(np.argmax(np.abs(interior - 0.5)))
        v, left_n, right_n = vals[j], vals[j - 1], vals[j + 1]
        at = np.flatnonzero(chi[:-1] == v)
        nxt = chi[at + 1]
        right = int((nxt == right_n).sum())
        left = int((nxt == left_n).sum())
        expect_right = v > 0.5
    else:
        if vals.shape[0] < 2 or not (vals[1:] != vals[:-1]).any():
            raise NoDistinguishingSite("no adjacent unequal conductances")
        diffs = np.abs(np.log(vals[1:]) - np.log(vals[:-1]))
        j = int(np.argmax(diffs))
        e1, e2 = vals[j], vals[j + 1]
        at1 = np.flatnonzero(chi[:-1] == e1)
        at2 = np.flatnonzero(chi[:-1] == e2)
        right = int((chi[at1 + 1] == e2).sum())   # crossed e1 then e2: moved right
        left = int((chi[at2 + 1] == e1).sum())
        v = e2 / (e1 + e2)
        expect_right = e2 > e1
    evidence = {"index": j, "value": float(v), "right": right, "left": left}
    if right == left:
        return ReconstructedEnvironment(vals, recon.anchor_value, recon.anchor_offset,
                                        oriented=False, orientation_evidence=evidence,
                                        anomalies=recon.anomalies)
    flip = (right > left) != expect_right
    if flip:
        vals = vals[::-1].copy()
        anchor_offset = vals.shape[0] - 1 - recon.anchor_offset
    else:
        anchor_offset = recon.anchor_offset
    evidence["flipped"] = bool(flip)
    return ReconstructedEnvironment(vals, recon.anchor_value, anchor_offset,
                                    oriented=True, orientation_evidence=evidence,
                                    anomalies=recon.anomalies)


def align_score(recon: ReconstructedEnvironment, env: Environment,
                search_radius: int) -> tuple[int, int, bool]:
    """Best shift of the reconstruction against the realized truth window."""
    n = recon.values.shape[0]
    if n == 0:
        return 0, 0, False
    sites = sorted(env.realized)
    lo, hi = sites[0], sites[-1]
    truth = env.window(lo, hi)
    best_shift, best_len = 0, 0
    for shift in range(-search_radius, search_radius + 1):
        off = shift - lo
        m = longest_match_at_shift(recon.values, truth, off, recon.anchor_offset)
        if m > best_len:
            best_len, best_shift = int(m), shift
    return best_shift, best_len, best_len == n


def env_to_csv(recon: ReconstructedEnvironment, path,
               best_shift: Optional[int] = None) -> None:
    """Two header rows: metadata, then per-offset values."""
    with open(path, "w") as fh:
        fh.write("anchor_value,oriented\n")
        fh.write(f"{recon.anchor_value!r},{recon.oriented}\n")
        if best_shift is None:
            fh.write("offset,value\n")
            for i, v in enumerate(recon.values):
                fh.write(f"{i - recon.anchor_offset},{float(v)!r}\n")
        else:
            fh.write("offset,value,true_site\n")
            for i, v in enumerate(recon.values):
                fh.write(f"{i - recon.anchor_offset},{float(v)!r},{best_shift + i}\n")


class EnvironmentReconstructor(BaseEstimator):
    """Estimator facade: classify the stream, assemble, orient."""

    def __init__(self, situation="site", case="a", p=None, kappa=None,
                 min_repeats=2, h_floor=None, se_mult=3.0, max_extent=64):
        self.situation = situation
        self.case = case
        self.p = p
        self.kappa = kappa
        self.min_repeats = min_repeats
        self.h_floor = h_floor
        self.se_mult = se_mult
        self.max_extent = max_extent

    def fit(self, X, y=None):
        chi = np.asarray(X, dtype=float).ravel()
        sit = Situation(self.situation)
        self.report_ = reconstruct_law(chi, sit, self.case, p=self.p,
                                       kappa=self.kappa, min_repeats=self.min_repeats,
                                       h_floor=self.h_floor, se_mult=self.se_mult)
        raw = assemble(chi, self.report_, self.max_extent)
        try:
            self.environment_ = orient(raw, chi, sit)
        except NoDistinguishingSite:
            self.environment_ = raw
        return self

    def transform(self, X):
        if not hasattr(self, "environment_"):
            raise PreconditionViolation("call fit before transform")
        return self.environment_.values.reshape(1, -1)
