"""Acceptance gate: one test per criterion, one pass/fail line each.

Heavy Monte Carlo fixtures are module-scoped and shared between criteria;
seeds 1..5 drive the environment, walk, and noise streams alike.
"""

import statistics
import time

import numpy as np
import pytest

import oracles
from rwre.counting import (
    detect_atom_candidates_site,
    fresh_observations_bond,
    fresh_observations_site,
    h_stats_site,
    marker_times_bond,
    marker_times_site,
)
from rwre.distributions import DistributionSpec, Situation, compute_stats, symmetrize
from rwre.environment import Environment
from rwre.errors import NoCrossing
from rwre.law import EmpiricalMeasure, Label, reconstruct_law
from rwre.metrics import continuous_sample_measure, ks_distance
from rwre.scenery import align_score, assemble, orient, shortest_crossings
from rwre.walk import corrupt, observe, simulate

SEEDS = (1, 2, 3, 4, 5)

BOND_RHO = DistributionSpec(Situation.BOND, atoms=((0.6, 0.25), (1.4, 0.25)),
                            uniforms=((0.5, 1.5, 0.5),), support_bound=0.4)
BOND_NU = DistributionSpec(Situation.BOND, atoms=((1.0, 0.5),),
                           uniforms=((0.5, 2.0, 0.5),), support_bound=0.4)

SITE_RHO_MIXED = symmetrize(DistributionSpec(
    Situation.SITE, atoms=((0.3, 0.5),), uniforms=((0.2, 0.45, 0.5),),
    support_bound=0.19))
SITE_NU_MIXED = DistributionSpec(Situation.SITE, atoms=((0.5, 0.5),),
                                 uniforms=((0.21, 0.44, 0.5),), support_bound=0.19)

SITE_RHO_ATOMIC = DistributionSpec(Situation.SITE, atoms=((0.3, 0.5), (0.7, 0.5)),
                                   support_bound=0.29)
SITE_NU_ATOMIC = DistributionSpec(Situation.SITE, atoms=((0.45, 0.5), (0.55, 0.5)),
                                  support_bound=0.29)


def _emit(k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'} [{detail}]"
    print(line)
    assert ok, line


def _labels(report):
    return {c.value: c.label for c in report.classification}


def _chi(rho, nu, p, n, seed, situation, keep_env=False):
    env = Environment(rho, seed)
    traj = simulate(env, n, seed, situation)
    chi = corrupt(observe(traj, env, situation), p, nu, seed, situation).chi
    return (env, chi) if keep_env else chi


# ---------------------------------------------------------------------------
# shared Monte Carlo fixtures


@pytest.fixture(scope="module")
def bond2_runs():
    """Bond case (a) mixture, p = 0.3, n = 2e6: reports plus h-statistics."""
    out = []
    for seed in SEEDS:
        t0 = time.perf_counter()
        chi = _chi(BOND_RHO, BOND_NU, 0.3, 2_000_000, seed, Situation.BOND)
        report = reconstruct_law(chi, Situation.BOND, "a", h_floor=0.01)
        wall = time.perf_counter() - t0
        out.append({"report": report, "wall": wall,
                    "h06": h_stats_site(chi, 0.6)})
    return out


@pytest.fixture(scope="module")
def site4_runs():
    """Site case (a) mixture, p = 0.3, n = 1e7 (Sinai range (log n)^2)."""
    out = []
    for seed in SEEDS:
        t0 = time.perf_counter()
        chi = _chi(SITE_RHO_MIXED, SITE_NU_MIXED, 0.3, 10_000_000, seed,
                   Situation.SITE)
        report = reconstruct_law(chi, Situation.SITE, "a", repeat_threshold=10)
        out.append({"report": report, "wall": time.perf_counter() - t0})
    return out


@pytest.fixture(scope="module")
def site5_runs():
    """Site purely atomic case (b), p = 0.1, n = 1e7."""
    out = []
    for seed in SEEDS:
        chi = _chi(SITE_RHO_ATOMIC, SITE_NU_ATOMIC, 0.1, 10_000_000, seed,
                   Situation.SITE)
        report = reconstruct_law(chi, Situation.SITE, "b", p=0.1, kappa=0.29,
                                 repeat_threshold=10)
        out.append({"report": report})
    return out


# ---------------------------------------------------------------------------
# criteria


def test_criterion_1_channel_and_determinism():
    # warm up the jitted stepping kernel outside the timed section
    env0 = Environment(SITE_RHO_MIXED, 99)
    simulate(env0, 1000, 99, Situation.SITE)

    t0 = time.perf_counter()
    env = Environment(SITE_RHO_MIXED, 1)
    traj = simulate(env, 100_000, 1, Situation.SITE)
    chi_prime = observe(traj, env, Situation.SITE)
    run = corrupt(chi_prime, 0.0, SITE_NU_MIXED, 1, Situation.SITE)
    identity = np.array_equal(run.chi, chi_prime)
    wall = time.perf_counter() - t0

    sites = np.arange(-5000, 5000)
    perm = np.random.default_rng(0).permutation(sites)
    fwd = Environment(SITE_RHO_MIXED, 7)
    vals_fwd = np.array([fwd.value(int(z)) for z in sites])
    shuf = Environment(SITE_RHO_MIXED, 7)
    for z in perm:
        shuf.value(int(z))
    order_free = np.array_equal(
        vals_fwd, np.array([shuf.realized[int(z)] for z in sites]))

    env_b = Environment(SITE_RHO_MIXED, 1)
    traj_b = simulate(env_b, 100_000, 1, Situation.SITE)
    rerun = np.array_equal(traj.positions, traj_b.positions)

    ok = identity and order_free and rerun and wall < 1.0
    _emit(1, ok, f"p=0 identity {identity}; query-order free {order_free}; "
                 f"rerun identical {rerun}; runtime {wall:.2f}s < 1s")


def test_criterion_2_bond_law_reconstruction(bond2_runs):
    label_hits, ks_vals, weight_errs, fresh_counts = 0, [], [], []
    for r in bond2_runs:
        rep = r["report"]
        lab = _labels(rep)
        if (lab.get(0.6) is Label.RHO_ATOM and lab.get(1.4) is Label.RHO_ATOM
                and lab.get(1.0) is Label.NU_ATOM):
            label_hits += 1
        emp = continuous_sample_measure(rep.law, [0.6, 1.4, 1.0])
        ks_vals.append(ks_distance(emp, BOND_RHO.continuous_part()))
        weight_errs.append(max(abs(rep.law.atom_weights.get(a, 0.0) - 0.25)
                               for a in (0.6, 1.4)))
        fresh_counts.append(int(rep.fresh_values.size))
    ks_med = statistics.median(ks_vals)
    walls = [r["wall"] for r in bond2_runs]
    ok = (label_hits >= 4 and ks_med <= 0.08 and max(weight_errs) <= 0.05
          and max(walls) < 30.0)
    _emit(2, ok, f"labels {label_hits}/5 >= 4; KS median {ks_med:.3f} <= 0.08; "
                 f"max atom-weight error {max(weight_errs):.3f} <= 0.05; "
                 f"fresh per run {min(fresh_counts)}-{max(fresh_counts)}; "
                 f"max {max(walls):.1f}s < 30s")


def test_criterion_3_closed_form_h(bond2_runs):
    z = compute_stats(BOND_RHO).z_norm
    h_target = 2.0 * 0.7 * 0.25 * 0.6 / z
    hc_target = 0.7 * (0.25 / 2.0 + BOND_RHO.expect_ratio(0.6))
    dev_h, dev_hc = [], []
    for r in bond2_runs:
        s = r["h06"]
        n = s.counts["n"]
        se_h = (h_target * (1 - h_target) / n) ** 0.5
        dev_h.append(abs(s.h_single - h_target) / se_h)
        single = s.counts["single"]
        se_hc = (hc_target * (1 - hc_target) / single) ** 0.5
        dev_hc.append(abs(s.h_cond_1 - hc_target) / se_hc)
    ok = max(dev_h) <= 3.0 and max(dev_hc) <= 3.0
    _emit(3, ok, f"h(0.6) target {h_target:.4f}, deviations "
                 f"{min(dev_h):.1f}-{max(dev_h):.1f} SE (<= 3); "
                 f"h(0.6|0.6) target {hc_target:.4f}, deviations "
                 f"{min(dev_hc):.1f}-{max(dev_hc):.1f} SE (<= 3)")


def test_criterion_4_site_mixed(site4_runs):
    cont = SITE_RHO_MIXED.continuous_part()
    label_hits, fresh_counts, ks_vals = 0, [], []
    for r in site4_runs:
        rep = r["report"]
        lab = _labels(rep)
        if (lab.get(0.3) is Label.RHO_ATOM and lab.get(0.7) is Label.RHO_ATOM
                and lab.get(0.5) is Label.NU_ATOM):
            label_hits += 1
        fresh_counts.append(int(rep.fresh_values.size))
        if rep.fresh_values.size:
            emp = EmpiricalMeasure(samples=rep.fresh_values[
                ~np.isin(rep.fresh_values, [0.3, 0.7])])
            ks_vals.append(ks_distance(emp, cont) if emp.samples.size else 1.0)
        else:
            ks_vals.append(1.0)
    ks_med = statistics.median(ks_vals)
    walls = [r["wall"] for r in site4_runs]
    ok = (label_hits >= 4 and min(fresh_counts) >= 100 and ks_med <= 0.15
          and max(walls) < 60.0)
    _emit(4, ok, f"labels {label_hits}/5 >= 4; fresh min {min(fresh_counts)} >= 100; "
                 f"KS median {ks_med:.3f} <= 0.15; max {max(walls):.1f}s < 60s")


def test_criterion_5_site_atomic(site5_runs):
    label_hits, beta2_errs = 0, []
    for r in site5_runs:
        rep = r["report"]
        lab = _labels(rep)
        if (lab.get(0.3) is Label.RHO_ATOM and lab.get(0.7) is Label.RHO_ATOM
                and lab.get(0.45) is Label.NU_ATOM
                and lab.get(0.55) is Label.NU_ATOM):
            label_hits += 1
        b2 = rep.diagnostics.get("beta2_hat")
        beta2_errs.append(abs(b2 - 0.5) if b2 is not None else 1.0)
    ok = label_hits >= 4 and max(beta2_errs) <= 0.1
    _emit(5, ok, f"labels {label_hits}/5 >= 4; "
                 f"|beta2_hat - 0.5| {min(beta2_errs):.2f}-{max(beta2_errs):.2f} "
                 f"(<= 0.1)")


def test_criterion_6_environment_reconstruction():
    successes, lengths, walls = 0, [], []
    for seed in SEEDS:
        t0 = time.perf_counter()
        env, chi = _chi(BOND_RHO, BOND_NU, 0.2, 10_000_000, seed,
                        Situation.BOND, keep_env=True)
        report = reconstruct_law(chi, Situation.BOND, "a", h_floor=0.01)
        recon = orient(assemble(chi, report, max_extent=64), chi, Situation.BOND)
        sites = env.realized
        radius = max(abs(min(sites)), abs(max(sites))) + recon.values.shape[0]
        _, match_len, exact = align_score(recon, env, radius)
        walls.append(time.perf_counter() - t0)
        lengths.append(recon.values.shape[0])
        if exact and recon.values.shape[0] >= 30 and recon.oriented:
            successes += 1
    ok = successes >= 4 and max(walls) < 90.0
    _emit(6, ok, f"exact+oriented {successes}/5 >= 4; window sizes "
                 f"{min(lengths)}-{max(lengths)} (>= 30); "
                 f"max {max(walls):.1f}s < 90s")


def test_criterion_7_counting_oracle_equivalence():
    rng = np.random.default_rng(2024)
    alphabets = {"site": np.array([0.3, 0.45, 0.55, 0.7]),
                 "bond": np.array([0.6, 1.0, 1.4])}
    checked = 0
    for i in range(200):
        situation = "site" if i % 2 == 0 else "bond"
        if i < 180:
            n = int(rng.integers(2, 300))
            unique_frac = 0.4
        else:
            n = int(rng.integers(1000, 10_001))
            unique_frac = 0.05
        alpha = alphabets[situation]
        kind = rng.random(n)
        chi = np.where(kind > unique_frac, rng.choice(alpha, size=n),
                       0.2 + 1.8 * rng.random(n))

        cand = detect_atom_candidates_site(chi)
        assert np.array_equal(cand, oracles.candidates_site(chi))
        t_site = marker_times_site(chi, cand)
        assert np.array_equal(t_site, oracles.marker_times_site(chi, cand))
        t_bond = marker_times_bond(chi, cand)
        assert np.array_equal(t_bond, oracles.marker_times_bond(chi, cand))
        nu_atoms = alpha[:1]
        assert np.array_equal(
            fresh_observations_site(chi, t_site, nu_atoms),
            oracles.fresh_observations(chi, t_site, nu_atoms, 2))
        assert np.array_equal(
            fresh_observations_bond(chi, t_bond, nu_atoms),
            oracles.fresh_observations(chi, t_bond, nu_atoms, 1))
        for a in alpha[:2]:
            s = h_stats_site(chi, a)
            assert (s.counts["single"], s.counts["pair"], s.counts["triple"]) \
                == oracles.h_counts(chi, a)
        w1, w2 = float(alpha[0]), float(alpha[-1])
        try:
            got = shortest_crossings(chi, w1, w2)
        except NoCrossing:
            assert oracles.shortest_crossings(chi, w1, w2) is None
        else:
            want = oracles.shortest_crossings(chi, w1, w2)
            assert [s.start_index for s in got] == [w[0] for w in want]
            assert all(np.array_equal(s.values, v)
                       for s, (_, v) in zip(got, want))
        checked += 1
    _emit(7, checked == 200, f"{checked}/200 random streams agree with the "
                             "naive-scan oracles on both situations")


def test_criterion_8_recurrence_diagnostic(site4_runs, site5_runs):
    rec4 = sum(1 for r in site4_runs if r["report"].recurrence == "recurrent")
    und5 = sum(1 for r in site5_runs if r["report"].recurrence == "undetermined")
    ok = rec4 == 5 and und5 == 5
    _emit(8, ok, f"mixed-law config recurrent {rec4}/5; "
                 f"purely atomic config undetermined {und5}/5")
