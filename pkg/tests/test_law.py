import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rwre.counting import HStats
from rwre.distributions import Situation
from rwre.errors import (
    EmptySample,
    InsufficientHits,
    PreconditionViolation,
    TieAtBoundary,
    UnsupportedCase,
)
from rwre.law import (
    Label,
    classification_to_csv,
    classify_atom_bond,
    classify_atom_site_pure,
    classify_atoms_known_count,
    crossing_ratio_target,
    detect_atoms_bond,
    empirical_law,
    pattern_test_atom_site,
    reconstruct_law,
    reconstruct_rho_atomic_bond,
    report_to_json,
    straight_crossing_estimator,
)


def _hs(value, single, pair, triple, n=1000):
    return HStats(value=value, h_single=single / n, h_double=pair / max(n - 1, 1),
                  h_triple=triple / max(n - 2, 1),
                  h_cond_1=pair / single if single else None,
                  h_cond_2=triple / pair if pair else None,
                  counts={"single": single, "pair": pair, "triple": triple, "n": n})


def test_empirical_law_weights():
    emp = empirical_law(np.array([0.3, 0.3, 0.7, 0.5]))
    assert emp.atom_weights == {0.3: 0.5, 0.7: 0.25, 0.5: 0.25}
    with pytest.raises(EmptySample):
        empirical_law(np.empty(0))


# ---------------------------------------------------------------------------
# site pattern test


def test_pattern_test_flags_noise_atom():
    # anchor window (w1, w2, alpha, w3) of distinct continuous values pins
    # the walker next to w2; a later double alpha right after w2 can only be
    # a reading error, so alpha is a noise atom
    chi = np.array([0.41, 0.23, 0.5, 0.62, 0.88, 0.23, 0.5, 0.5, 0.77])
    rna = np.array([0.41, 0.23, 0.62, 0.88, 0.77])
    out = pattern_test_atom_site(chi, 0.5, rna)
    assert out.label is Label.NU_ATOM
    assert out.evidence["anchors"] == 1
    assert out.evidence["double_after_anchor_value"] == 1


def test_pattern_test_keeps_environment_atom():
    chi = np.array([0.41, 0.23, 0.5, 0.62, 0.88, 0.23, 0.5, 0.77])
    rna = np.array([0.41, 0.23, 0.62, 0.88, 0.77])
    out = pattern_test_atom_site(chi, 0.5, rna)
    assert out.label is Label.RHO_ATOM


def test_pattern_test_undecided_without_anchor():
    chi = np.array([0.5, 0.5, 0.5, 0.5])
    out = pattern_test_atom_site(chi, 0.5, np.array([0.41]))
    assert out.label is Label.UNDECIDED
    assert out.evidence["anchors"] == 0


# ---------------------------------------------------------------------------
# purely atomic site classification


def test_classify_site_pure_threshold():
    # h(a|aa) above p: environment atom; below: noise atom
    assert classify_atom_site_pure(_hs(0.3, 400, 100, 30), 0.1, 0.29).label \
        is Label.RHO_ATOM
    assert classify_atom_site_pure(_hs(0.45, 400, 100, 5), 0.1, 0.29).label \
        is Label.NU_ATOM


def test_classify_site_pure_degenerate_counts():
    no_pairs = classify_atom_site_pure(_hs(0.3, 5, 0, 0), 0.1, 0.29)
    assert no_pairs.label is Label.RHO_ATOM
    assert no_pairs.evidence["degenerate"] == "no_pairs"
    no_triples = classify_atom_site_pure(_hs(0.3, 50, 4, 0), 0.1, 0.29)
    assert no_triples.label is Label.RHO_ATOM
    assert no_triples.evidence["degenerate"] == "no_triples"
    assert classify_atom_site_pure(_hs(0.3, 1, 0, 0), 0.1, 0.29).label \
        is Label.UNDECIDED


def test_classify_site_pure_needs_small_p():
    with pytest.raises(PreconditionViolation):
        classify_atom_site_pure(_hs(0.3, 10, 5, 2), 0.3, 0.29)  # 0.3 > 0.29/1.29


def test_classify_known_count_orders_by_h_cond_2():
    stats = [_hs(0.3, 100, 50, 40), _hs(0.45, 100, 50, 5),
             _hs(0.55, 100, 50, 6), _hs(0.7, 100, 50, 45)]
    labels = classify_atoms_known_count(stats, 2, "rho")
    assert labels == [Label.RHO_ATOM, Label.NU_ATOM, Label.NU_ATOM, Label.RHO_ATOM]
    labels_nu = classify_atoms_known_count(stats, 2, "nu")
    assert labels_nu == labels


def test_classify_known_count_tie_and_bounds():
    stats = [_hs(0.3, 100, 50, 10), _hs(0.45, 100, 50, 10)]
    with pytest.raises(TieAtBoundary):
        classify_atoms_known_count(stats, 1, "rho")
    with pytest.raises(PreconditionViolation):
        classify_atoms_known_count(stats, 3, "rho")


@settings(max_examples=60, deadline=None)
@given(trips=st.lists(st.integers(0, 40), min_size=2, max_size=8, unique=True),
       m=st.integers(1, 8), scale=st.integers(2, 9))
def test_known_count_invariant_under_monotone_transform(trips, m, scale):
    # labels depend only on the ranking of h(a|aa)
    if m > len(trips):
        m = len(trips)
    base = [_hs(0.1 + 0.1 * i, 400, 50, t) for i, t in enumerate(trips)]
    scaled = [_hs(0.1 + 0.1 * i, 400, 50 * scale, t * scale)
              for i, t in enumerate(trips)]
    assert classify_atoms_known_count(base, m) == classify_atoms_known_count(scaled, m)


# ---------------------------------------------------------------------------
# straight-crossing estimator


def test_crossing_ratio_target_hand_value():
    assert math.isclose(crossing_ratio_target(0.7, 0.5), 0.5925)


def _monotone_colors(alpha1, alpha2, L):
    """Observation stream of a path stepping right forever from vertex 1."""
    u = np.arange(1, L + 1)
    return np.where(np.isin(u % 4, (0, 1)), alpha1, alpha2)


def test_straight_crossing_monotone_path_clamps_to_zero():
    # every freshly entered interval is straight-crossed: ratio 1 exceeds the
    # invertible range for alpha2 = 0.5, so the estimate clamps at beta2 = 0
    chi = _monotone_colors(0.3, 0.5, 40)
    beta2, hits, straight = straight_crossing_estimator(
        chi, 0.3, 0.5, np.ones(40, dtype=bool))
    assert (hits, straight) == (9, 9)
    assert beta2 == 0.0


def test_straight_crossing_no_straights():
    # path 1,2,3,4,5,4,5,4: enters the second interval (one hit) but never
    # traverses it monotonically, so no straight crossing is recorded
    chi = np.array([0.3, 0.5, 0.5, 0.3, 0.3, 0.3, 0.3, 0.3])
    beta2, hits, straight = straight_crossing_estimator(
        chi, 0.3, 0.5, np.ones(8, dtype=bool))
    assert (hits, straight) == (1, 0)
    assert beta2 == 1.0  # ratio 0 -> val 1 -> sqrt(1)


def test_straight_crossing_anchor_interval_excluded():
    # a path never leaving its starting interval yields no first hits at all
    chi = np.array([0.3, 0.5, 0.3, 0.5, 0.3, 0.5, 0.3, 0.5])
    with pytest.raises(InsufficientHits):
        straight_crossing_estimator(chi, 0.3, 0.5, np.ones(8, dtype=bool))


def test_straight_crossing_requires_clean_data():
    chi = _monotone_colors(0.3, 0.5, 40)
    with pytest.raises(InsufficientHits):
        straight_crossing_estimator(chi, 0.3, 0.5, np.zeros(40, dtype=bool))


def test_straight_crossing_mask_equivalence():
    # masking corrupt positions must equal running on the uncorrupted stream
    # with the same index windows
    rng = np.random.default_rng(5)
    clean = rng.choice([0.3, 0.5], size=5000)
    mask = rng.random(5000) > 0.2
    corrupted = clean.copy()
    corrupted[~mask] = 0.99
    assert straight_crossing_estimator(clean, 0.3, 0.5, mask) == \
        straight_crossing_estimator(corrupted, 0.3, 0.5, mask)


# ---------------------------------------------------------------------------
# bond classification and law recovery


def test_detect_atoms_bond_split():
    chi = np.concatenate([np.full(50, 1.0), np.full(40, 0.6),
                          [0.71, 0.82, 0.71, 0.93]])
    split = detect_atoms_bond(chi, h_floor=0.05)
    assert set(split.candidates) == {0.6, 1.0}
    assert list(split.rho_continuous) == [0.71]
    assert set(split.nu_continuous) == {0.82, 0.93}


def test_detect_atoms_bond_default_floor():
    chi = np.concatenate([np.full(11, 1.0), np.arange(100) * 0.001 + 0.5])
    split = detect_atoms_bond(chi)  # floor 10/n
    assert list(split.candidates) == [1.0]


def test_classify_atom_bond_labels():
    # strong excess of immediate re-reads: environment edge
    assert classify_atom_bond(_hs(0.6, 500, 200, 0, n=10_000)).label is Label.RHO_ATOM
    # re-read rate equals the overall frequency: noise value
    assert classify_atom_bond(_hs(1.0, 1000, 100, 0, n=10_000)).label is Label.NU_ATOM
    # too few observations to tell
    assert classify_atom_bond(_hs(1.4, 5, 1, 0, n=10_000)).label is Label.UNDECIDED


def test_reconstruct_rho_atomic_bond_weights():
    stats = [_hs(0.6, 300, 0, 0, n=1000), _hs(1.4, 350, 0, 0, n=1000),
             _hs(1.0, 200, 0, 0, n=1000)]
    emp = reconstruct_rho_atomic_bond(stats, np.array([0.6, 1.4]))
    raw = {0.6: 0.3 / 0.6, 1.4: 0.35 / 1.4}
    z = sum(raw.values())
    assert emp.atom_weights == pytest.approx({v: w / z for v, w in raw.items()})
    with pytest.raises(EmptySample):
        reconstruct_rho_atomic_bond(stats, np.empty(0))


# ---------------------------------------------------------------------------
# orchestration


def test_reconstruct_law_rejects_bad_case():
    with pytest.raises(PreconditionViolation):
        reconstruct_law(np.array([0.3, 0.5]), Situation.SITE, "c")


def test_reconstruct_law_site_pure_needs_parameters():
    chi = np.array([0.3, 0.3, 0.5, 0.3])
    with pytest.raises(PreconditionViolation):
        reconstruct_law(chi, Situation.SITE, "b")


def test_reconstruct_law_site_pure_three_atoms_unsupported():
    rng = np.random.default_rng(0)
    chi = rng.choice([0.2, 0.5, 0.8], size=3000)
    with pytest.raises(UnsupportedCase):
        reconstruct_law(chi, Situation.SITE, "b", p=0.05, kappa=0.19,
                        known_m=3, known_which="rho")


def test_reconstruct_law_uncorrupted_matches_disabled_filtering(
        site_mixed_spec, site_noise_spec):
    # p = 0: the pipeline must agree with itself when noise classification
    # has nothing to remove (no nu atoms, empty nu continuous side)
    from rwre.environment import Environment
    from rwre.walk import corrupt, observe, simulate

    env = Environment(site_mixed_spec, 3)
    traj = simulate(env, 200_000, 3, Situation.SITE)
    chi = corrupt(observe(traj, env, Situation.SITE), 0.0, site_noise_spec, 3,
                  Situation.SITE).chi
    report = reconstruct_law(chi, Situation.SITE, "a")
    assert report.nu_atoms == []
    assert report.nu_continuous_values.size == 0
    assert all(c.label is not Label.NU_ATOM for c in report.classification)


def test_report_export_round_trip(tmp_path):
    from rwre.distributions import DistributionSpec
    from rwre.environment import Environment
    from rwre.walk import corrupt, observe, simulate

    rho = DistributionSpec(Situation.BOND, atoms=((0.6, 0.5), (1.4, 0.5)),
                           support_bound=0.4)
    nu = DistributionSpec(Situation.BOND, atoms=((1.0, 1.0,),),
                          support_bound=0.4)
    env = Environment(rho, 1)
    traj = simulate(env, 50_000, 1, Situation.BOND)
    chi = corrupt(observe(traj, env, Situation.BOND), 0.2, nu, 1,
                  Situation.BOND).chi
    report = reconstruct_law(chi, Situation.BOND, "b", h_floor=0.01)
    assert report.law is not None
    jpath = tmp_path / "report.json"
    spath = tmp_path / "samples.csv"
    cpath = tmp_path / "classification.csv"
    report_to_json(report, jpath, samples_path=spath)
    classification_to_csv(report, cpath)

    doc = json.loads(jpath.read_text())
    assert doc["situation"] == "bond" and doc["case"] == "b"
    assert len(doc["classification"]) == len(report.classification)
    got = {row["value"]: row["weight"] for row in doc["estimated_atoms"]}
    assert got == report.law.atom_weights
    lines = cpath.read_text().strip().split("\n")
    assert lines[0].startswith("value,label")
    assert len(lines) == 1 + len(report.classification) + \
        report.rho_continuous_values.size + report.nu_continuous_values.size
