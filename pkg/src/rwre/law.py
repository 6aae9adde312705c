"""Reconstruction of the environment law from the corrupted stream alone."""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator

from ._kernels import straight_crossing_counts
from .counting import (
    HStats,
    StreamIndex,
    detect_atom_candidates_site,
    fresh_observations_bond,
    fresh_observations_site,
    h_stats_bond,
    h_stats_site,
    marker_times_bond,
    marker_times_site,
    recurrence_diagnostic,
    split_nonatom_values,
)
from .distributions import Situation
from .errors import (
    EmptySample,
    InsufficientHits,
    PreconditionViolation,
    TieAtBoundary,
    UnsupportedCase,
)


class Label(enum.Enum):
    RHO_ATOM = "rho_atom"
    NU_ATOM = "nu_atom"
    RHO_CONTINUOUS = "rho_continuous"
    NU_CONTINUOUS = "nu_continuous"
    UNDECIDED = "undecided"


@dataclass
class ValueClass:
    value: float
    label: Label
    evidence: dict = field(default_factory=dict)


@dataclass
class EmpiricalMeasure:
    """Samples (uniform or explicitly weighted) and/or explicit atom weights."""

    samples: np.ndarray
    atom_weights: dict[float, float] = field(default_factory=dict)
    normalized: bool = False
    sample_weights: Optional[np.ndarray] = None  # normalized; None means uniform


def empirical_law(values: np.ndarray) -> EmpiricalMeasure:
    """Uniform point masses on the given observations."""
    values = np.asarray(values, dtype=float)
    n = values.shape[0]
    if n == 0:
        raise EmptySample("no observations to build an empirical law from")
    uniq, counts = np.unique(values, return_counts=True)
    weights = {float(v): c / n for v, c in zip(uniq, counts)}
    return EmpiricalMeasure(samples=values, atom_weights=weights, normalized=True)


# ---------------------------------------------------------------------------
# situation i) tests


def pattern_test_atom_site(chi: np.ndarray, alpha: float,
                           rho_nonatoms: np.ndarray) -> ValueClass:
    """Four-value window test: anchored between unique continuous values the
    walker's position is known, so a repeated alpha right after the anchor
    can only be a reading error."""
    rho_nonatoms = np.asarray(rho_nonatoms, dtype=float)
    in_rna = np.isin(chi, rho_nonatoms)
    is_a = chi == alpha
    n = chi.shape[0]
    if n < 4:
        return ValueClass(alpha, Label.UNDECIDED, {"anchors": 0})
    anchor = (in_rna[:-3] & in_rna[1:-2] & is_a[2:-1] & in_rna[3:]
              & (chi[:-3] != chi[1:-2]) & (chi[1:-2] != chi[3:]) & (chi[:-3] != chi[3:]))
    k = np.flatnonzero(anchor)
    if k.size == 0:
        return ValueClass(alpha, Label.UNDECIDED, {"anchors": 0})
    alpha1 = np.unique(chi[k + 1])
    double = is_a[1:-1] & is_a[2:] & np.isin(chi[:-2], alpha1)
    n_double = int(double.sum())
    ev = {"anchors": int(k.size), "anchor_followers": int(alpha1.size),
          "double_after_anchor_value": n_double}
    label = Label.NU_ATOM if n_double > 0 else Label.RHO_ATOM
    return ValueClass(alpha, label, ev)


def classify_atom_site_pure(stats: HStats, p: float, kappa: float) -> ValueClass:
    """Purely atomic environment law: decide by the double-conditional
    repeat frequency against p (valid when p < kappa / (kappa + 1))."""
    if not 0.0 < p < kappa / (kappa + 1.0):
        raise PreconditionViolation(
            f"p={p} must lie in (0, kappa/(kappa+1)) = (0, {kappa / (kappa + 1.0)})")
    single = stats.counts["single"]
    pairs = stats.counts["pair"]
    triples = stats.counts["triple"]
    ev = {"single": single, "pair": pairs, "triple": triples,
          "h_cond_2": stats.h_cond_2, "threshold": p}
    if pairs == 0:
        if single >= 2:
            return ValueClass(stats.value, Label.RHO_ATOM, {**ev, "degenerate": "no_pairs"})
        return ValueClass(stats.value, Label.UNDECIDED, ev)
    if triples == 0:
        # vanishing limit surrogate: a noise atom would keep producing triples
        return ValueClass(stats.value, Label.RHO_ATOM, {**ev, "degenerate": "no_triples"})
    label = Label.RHO_ATOM if stats.h_cond_2 > p else Label.NU_ATOM
    return ValueClass(stats.value, label, ev)


def classify_atoms_known_count(all_stats: list[HStats], m: int,
                               which: str = "rho") -> list[Label]:
    """Rank candidates by h(a|aa); the known count fixes the split."""
    if not 1 <= m <= len(all_stats):
        raise PreconditionViolation(f"M={m} outside 1..{len(all_stats)}")
    key = [s.h_cond_2 if s.h_cond_2 is not None else math.inf for s in all_stats]
    order = sorted(range(len(key)), key=lambda i: -key[i])
    if which == "rho":
        cut_hi, cut_lo = m - 1, m
        top_label, rest_label = Label.RHO_ATOM, Label.NU_ATOM
    elif which == "nu":
        cut_hi, cut_lo = len(key) - m - 1, len(key) - m
        top_label, rest_label = Label.RHO_ATOM, Label.NU_ATOM
    else:
        raise ValueError("which must be 'rho' or 'nu'")
    if cut_lo < len(key) and cut_hi >= 0 and key[order[cut_hi]] == key[order[cut_lo]]:
        raise TieAtBoundary(f"h(a|aa) tie at the classification boundary: {key[order[cut_hi]]}")
    labels = [Label.NU_ATOM] * len(key)
    for r, i in enumerate(order):
        labels[i] = top_label if r <= cut_hi else rest_label
    return labels


def crossing_ratio_target(alpha2: float, beta2: float) -> float:
    """Expected fraction of straight first crossings."""
    return (1.0 - alpha2 * (1.0 - alpha2)) * (1.0 - beta2 ** 2)


def straight_crossing_estimator(chi: np.ndarray, alpha1: float, alpha2: float,
                                clean_mask: np.ndarray) -> tuple[float, int, int]:
    """Estimate the weight of alpha2 in a two-atom environment law.

    Maps each maximal clean segment to a path on the period-4 colored line,
    counts the intervals entered for the first time within their segment and
    the subset that the path traverses monotonically in three steps somewhere
    in the same segment, and inverts the crossing probability.  The estimate
    is clamped to [0, 1].  The fraction is biased low when clean segments are
    short: a straight traversal of a freshly entered interval typically needs
    a far longer uncorrupted window than the entry itself."""
    mask = np.asarray(clean_mask, dtype=bool) & ((chi == alpha1) | (chi == alpha2))
    if mask.shape[0] != chi.shape[0]:
        raise PreconditionViolation("clean_mask length mismatch")
    colors = (chi == alpha2).astype(np.int8)
    padded = np.concatenate(([False], mask, [False]))
    d = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(d == 1).astype(np.int64)
    ends = np.flatnonzero(d == -1).astype(np.int64)
    if starts.size == 0:
        raise InsufficientHits("no clean observations")
    maxlen = int((ends - starts).max())
    u_buf = np.empty(max(maxlen, 1), dtype=np.int64)
    base = maxlen // 4 + 2
    stamp = np.zeros(2 * base + 2, dtype=np.int64)
    crossed = np.zeros(2 * base + 2, dtype=np.int64)
    hits, straight = straight_crossing_counts(colors, starts, ends, u_buf, stamp,
                                              crossed, base)
    if hits == 0:
        raise InsufficientHits("no interval first-hits in any clean segment")
    ratio = straight / hits
    val = 1.0 - ratio / (1.0 - alpha2 * (1.0 - alpha2))
    beta2 = math.sqrt(min(max(val, 0.0), 1.0))
    return beta2, int(hits), int(straight)


# ---------------------------------------------------------------------------
# situation ii) tests


@dataclass
class BondValueSplit:
    candidates: np.ndarray       # possible atoms: h above the floor
    rho_continuous: np.ndarray   # repeated values with h at noise level
    nu_continuous: np.ndarray    # single occurrences, discarded
    h_floor: float


def detect_atoms_bond(chi: np.ndarray, h_floor: Optional[float] = None,
                      index: Optional[StreamIndex] = None) -> BondValueSplit:
    """Split observed values by their empirical frequency.

    The candidate atoms are the values whose relative frequency clears the
    floor; repeated values below it realize the continuous environment part;
    single occurrences are noise."""
    idx = index if index is not None else StreamIndex.build(chi)
    n = chi.shape[0]
    if h_floor is None:
        h_floor = 10.0 / n
    h = idx.counts / n
    cand = h > h_floor
    return BondValueSplit(
        candidates=idx.values[cand],
        rho_continuous=idx.values[~cand & (idx.counts >= 2)],
        nu_continuous=idx.values[~cand & (idx.counts == 1)],
        h_floor=h_floor,
    )


def classify_atom_bond(stats: HStats, se_mult: float = 3.0,
                       min_count: int = 10) -> ValueClass:
    """An environment atom is read again right after itself more often than
    its overall frequency (the walker can recross the same edge); a noise
    atom shows no such excess."""
    single = stats.counts["single"]
    pairs = stats.counts["pair"]
    ev = {"single": single, "pair": pairs, "h_single": stats.h_single,
          "h_cond_1": stats.h_cond_1, "se_mult": se_mult}
    if single < min_count:
        return ValueClass(stats.value, Label.UNDECIDED, ev)
    hc = pairs / single
    se = math.sqrt(max(hc * (1.0 - hc), 1.0 / single) / single)
    diff = hc - stats.h_single
    ev.update({"se": se, "diff": diff})
    if diff > se_mult * se:
        return ValueClass(stats.value, Label.RHO_ATOM, ev)
    if abs(diff) <= se_mult * se:
        return ValueClass(stats.value, Label.NU_ATOM, ev)
    return ValueClass(stats.value, Label.UNDECIDED, ev)


def reconstruct_rho_atomic_bond(stats_list: list[HStats],
                                rho_atoms: np.ndarray) -> EmpiricalMeasure:
    """Atom weights from h(a)/a, normalized (Z and p drop out)."""
    rho_atoms = np.asarray(rho_atoms, dtype=float)
    raw = {}
    for s in stats_list:
        if s.value in rho_atoms:
            raw[s.value] = s.h_single / s.value
    total = sum(raw.values())
    if total <= 0:
        raise EmptySample("no environment atoms to reconstruct")
    return EmpiricalMeasure(samples=np.empty(0),
                            atom_weights={v: w / total for v, w in raw.items()},
                            normalized=True)


# ---------------------------------------------------------------------------
# orchestration


@dataclass
class ReconstructionReport:
    situation: Situation
    case: str
    classification: list[ValueClass]
    rho_continuous_values: np.ndarray
    nu_continuous_values: np.ndarray
    law: Optional[EmpiricalMeasure]
    fresh_values: np.ndarray
    marker_count: int
    recurrence: Optional[str]
    diagnostics: dict = field(default_factory=dict)

    def labeled(self, label: Label) -> list[float]:
        return [c.value for c in self.classification if c.label is label]

    @property
    def rho_atoms(self) -> list[float]:
        return self.labeled(Label.RHO_ATOM)

    @property
    def nu_atoms(self) -> list[float]:
        return self.labeled(Label.NU_ATOM)

    def rho_value_set(self) -> np.ndarray:
        """Every value classified as coming from the environment."""
        return np.concatenate([np.asarray(self.rho_atoms, dtype=float),
                               self.rho_continuous_values])


def reconstruct_law(chi: np.ndarray, situation: Situation, case: str,
                    p: Optional[float] = None, kappa: Optional[float] = None,
                    min_repeats: int = 2, h_floor: Optional[float] = None,
                    se_mult: float = 3.0, known_m: Optional[int] = None,
                    known_which: str = "rho", repeat_threshold: int = 10) -> ReconstructionReport:
    """Full pipeline from the corrupted stream to the estimated law."""
    chi = np.asarray(chi, dtype=float)
    if case not in ("a", "b"):
        raise PreconditionViolation("case must be 'a' or 'b'")
    idx = StreamIndex.build(chi)
    if situation is Situation.SITE:
        return _reconstruct_site(chi, idx, case, p, kappa, min_repeats,
                                 known_m, known_which, repeat_threshold)
    return _reconstruct_bond(chi, idx, case, h_floor, se_mult)


def _reconstruct_site(chi, idx, case, p, kappa, min_repeats,
                      known_m, known_which, repeat_threshold):
    candidates = detect_atom_candidates_site(chi)
    rho_na, nu_na = split_nonatom_values(chi, candidates, min_repeats, idx)
    diagnostics: dict = {"n_candidates": int(candidates.size)}
    classification: list[ValueClass] = []

    if case == "a":
        for a in candidates:
            classification.append(pattern_test_atom_site(chi, a, rho_na))
        nu_atoms = np.array([c.value for c in classification if c.label is Label.NU_ATOM])
        times = marker_times_site(chi, candidates, idx)
        fresh = fresh_observations_site(chi, times, nu_atoms, idx)
        law = empirical_law(fresh) if fresh.size else None
        diagnostics["n_markers"] = int(times.size)
    else:
        stats = [h_stats_site(chi, a) for a in candidates]
        if known_m is not None:
            labels = classify_atoms_known_count(stats, known_m, known_which)
            classification = [ValueClass(s.value, lab, {"h_cond_2": s.h_cond_2})
                              for s, lab in zip(stats, labels)]
        else:
            if p is None or kappa is None:
                raise PreconditionViolation("purely atomic site case needs p and kappa")
            classification = [classify_atom_site_pure(s, p, kappa) for s in stats]
        rho_atoms = sorted(c.value for c in classification if c.label is Label.RHO_ATOM)
        times = np.empty(0, dtype=np.int64)
        fresh = np.empty(0)
        if len(rho_atoms) == 2:
            a1, a2 = rho_atoms
            clean = np.isin(chi, rho_atoms)
            try:
                beta2, m_hits, m_straight = straight_crossing_estimator(chi, a1, a2, clean)
                law = EmpiricalMeasure(samples=np.empty(0),
                                       atom_weights={a1: 1.0 - beta2, a2: beta2},
                                       normalized=True)
                diagnostics.update({"beta2_hat": beta2, "m_hits": m_hits,
                                    "m_straight": m_straight})
            except InsufficientHits as exc:
                law = None
                diagnostics["crossing_error"] = str(exc)
        elif len(rho_atoms) == 1:
            law = EmpiricalMeasure(samples=np.empty(0),
                                   atom_weights={rho_atoms[0]: 1.0}, normalized=True)
        elif len(rho_atoms) == 0:
            law = None
        else:
            raise UnsupportedCase(
                "weight recovery for a purely atomic site law is implemented "
                f"for at most two atoms, found {len(rho_atoms)}")

    recurrence = recurrence_diagnostic(chi, repeat_threshold, candidates, idx)
    return ReconstructionReport(
        situation=Situation.SITE, case=case, classification=classification,
        rho_continuous_values=rho_na, nu_continuous_values=nu_na,
        law=law, fresh_values=fresh if case == "a" else np.empty(0),
        marker_count=int(times.size), recurrence=recurrence, diagnostics=diagnostics)


def _reconstruct_bond(chi, idx, case, h_floor, se_mult):
    split = detect_atoms_bond(chi, h_floor, idx)
    stats = [h_stats_bond(chi, a) for a in split.candidates]
    classification = [classify_atom_bond(s, se_mult) for s in stats]
    nu_atoms = np.array([c.value for c in classification if c.label is Label.NU_ATOM])
    diagnostics = {"n_candidates": int(split.candidates.size), "h_floor": split.h_floor}

    times = np.empty(0, dtype=np.int64)
    fresh = np.empty(0)
    if case == "a":
        times = marker_times_bond(chi, split.candidates, idx)
        fresh, kept = fresh_observations_bond(chi, times, nu_atoms, idx,
                                              return_times=True)
        law = _weighted_bond_law(chi, fresh, kept) if fresh.size else None
        diagnostics["n_markers"] = int(times.size)
    else:
        rho_atoms = np.array([c.value for c in classification if c.label is Label.RHO_ATOM])
        law = reconstruct_rho_atomic_bond(stats, rho_atoms) if rho_atoms.size else None

    return ReconstructionReport(
        situation=Situation.BOND, case=case, classification=classification,
        rho_continuous_values=split.rho_continuous,
        nu_continuous_values=split.nu_continuous,
        law=law, fresh_values=fresh, marker_count=int(times.size),
        recurrence=None, diagnostics=diagnostics)


def _weighted_bond_law(chi: np.ndarray, fresh: np.ndarray,
                       kept_times: np.ndarray) -> EmpiricalMeasure:
    """Empirical law of the fresh conductances, bias-corrected.

    A fresh edge f after marker edge e enters the sample only when the
    walker steps outward, which happens with probability f / (e + f);
    weighting each observation by (e + f) / f undoes that size bias."""
    e = chi[kept_times - 1]
    w = (e + fresh) / fresh
    w = w / w.sum()
    order = np.argsort(fresh, kind="stable")
    atom_weights: dict[float, float] = {}
    for v, wt in zip(fresh[order], w[order]):
        atom_weights[float(v)] = atom_weights.get(float(v), 0.0) + float(wt)
    return EmpiricalMeasure(samples=fresh, atom_weights=atom_weights,
                            normalized=True, sample_weights=w)


# ---------------------------------------------------------------------------
# export


def report_to_json(report: ReconstructionReport, path, samples_path=None) -> None:
    doc = {
        "situation": report.situation.value,
        "case": report.case,
        "classification": [
            {"value": c.value, "label": c.label.value, "evidence": _plain(c.evidence)}
            for c in report.classification
        ],
        "estimated_atoms": (
            [{"value": v, "weight": w} for v, w in sorted(report.law.atom_weights.items())]
            if report.law is not None else []
        ),
        "n_rho_continuous": int(report.rho_continuous_values.size),
        "n_nu_continuous": int(report.nu_continuous_values.size),
        "marker_count": report.marker_count,
        "n_fresh": int(report.fresh_values.size),
        "recurrence": report.recurrence,
        "estimated_samples_file": str(samples_path) if samples_path is not None else None,
        "diagnostics": _plain(report.diagnostics),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
    if samples_path is not None:
        with open(samples_path, "w") as fh:
            fh.write("value\n")
            for v in report.fresh_values:
                fh.write(repr(float(v)) + "\n")


def classification_to_csv(report: ReconstructionReport, path) -> None:
    with open(path, "w") as fh:
        fh.write("value,label,h_single,h_cond_1,h_cond_2,single,pair,triple\n")
        for c in report.classification:
            e = c.evidence
            fh.write(",".join([
                repr(float(c.value)), c.label.value,
                str(e.get("h_single", "")), str(e.get("h_cond_1", "")),
                str(e.get("h_cond_2", "")), str(e.get("single", "")),
                str(e.get("pair", "")), str(e.get("triple", "")),
            ]) + "\n")
        for v in report.rho_continuous_values:
            fh.write(f"{float(v)!r},{Label.RHO_CONTINUOUS.value},,,,,,\n")
        for v in report.nu_continuous_values:
            fh.write(f"{float(v)!r},{Label.NU_CONTINUOUS.value},,,,,,\n")


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ---------------------------------------------------------------------------
# estimator facade


class LawReconstructor(BaseEstimator):
    """Estimator wrapper: fit on the raw stream, expose the report.

    Parameters mirror :func:`reconstruct_law`; ``situation`` and ``case``
    are plain strings so the object round-trips through get/set_params."""

    def __init__(self, situation="site", case="a", p=None, kappa=None,
                 min_repeats=2, h_floor=None, se_mult=3.0, known_m=None,
                 known_which="rho", repeat_threshold=10):
        self.situation = situation
        self.case = case
        self.p = p
        self.kappa = kappa
        self.min_repeats = min_repeats
        self.h_floor = h_floor
        self.se_mult = se_mult
        self.known_m = known_m
        self.known_which = known_which
        self.repeat_threshold = repeat_threshold

    def fit(self, X, y=None):
        chi = np.asarray(X, dtype=float).ravel()
        self.report_ = reconstruct_law(
            chi, Situation(self.situation), self.case, p=self.p, kappa=self.kappa,
            min_repeats=self.min_repeats, h_floor=self.h_floor, se_mult=self.se_mult,
            known_m=self.known_m, known_which=self.known_which,
            repeat_threshold=self.repeat_threshold)
        self.law_ = self.report_.law
        self.classification_ = self.report_.classification
        return self

    def predict(self, X):
        """Label each value by the fitted classification (bit-exact match)."""
        if not hasattr(self, "report_"):
            raise PreconditionViolation("call fit before predict")
        table = {c.value: c.label.value for c in self.classification_}
        for v in self.report_.rho_continuous_values:
            table[float(v)] = Label.RHO_CONTINUOUS.value
        for v in self.report_.nu_continuous_values:
            table[float(v)] = Label.NU_CONTINUOUS.value
        x = np.asarray(X, dtype=float).ravel()
        return np.array([table.get(float(v), Label.UNDECIDED.value) for v in x])
