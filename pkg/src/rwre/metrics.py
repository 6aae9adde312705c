"""Distances between estimated and true laws, plus convergence sweeps."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .distributions import DistributionSpec
from .environment import Environment
from .errors import EmptySample
from .law import EmpiricalMeasure, Label, reconstruct_law
from .scenery import align_score, assemble, orient


@dataclass
class LawDistance:
    ks: float
    wasserstein1: float
    tv_atoms: float
    n_samples: int


def _emp_points(emp: EmpiricalMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Support points and weights of the empirical measure."""
    if emp.samples is not None and emp.samples.size:
        if emp.sample_weights is not None:
            pts, inv = np.unique(emp.samples, return_inverse=True)
            w = np.zeros(pts.shape[0])
            np.add.at(w, inv, emp.sample_weights)
            return pts, w / w.sum()
        pts, counts = np.unique(emp.samples, return_counts=True)
        return pts, counts / emp.samples.size
    if emp.atom_weights:
        items = sorted(emp.atom_weights.items())
        return (np.array([v for v, _ in items]),
                np.array([w for _, w in items]))
    raise EmptySample("empirical measure has neither samples nor atom weights")


def ks_distance(emp: EmpiricalMeasure, spec: DistributionSpec) -> float:
    """sup |F_emp - F_spec|, checking both one-sided limits at every jump."""
    pts, wts = _emp_points(emp)
    grid = np.union1d(pts, spec.breakpoints())
    cum = np.cumsum(wts)
    f_emp = np.zeros(grid.shape[0])
    f_emp_left = np.zeros(grid.shape[0])
    i_right = np.searchsorted(pts, grid, side="right")
    i_left = np.searchsorted(pts, grid, side="left")
    f_emp[i_right > 0] = cum[i_right[i_right > 0] - 1]
    f_emp_left[i_left > 0] = cum[i_left[i_left > 0] - 1]
    d = np.abs(f_emp - spec.cdf(grid))
    d_left = np.abs(f_emp_left - spec.cdf_left(grid))
    return float(max(d.max(), d_left.max()))


def wasserstein1_distance(emp: EmpiricalMeasure, spec: DistributionSpec) -> float:
    """Integral of |F_emp - F_spec|, exact between breakpoints.

    F_emp is a step function and F_spec is piecewise linear, so on each cell
    the difference is linear; the integral splits at the sign change."""
    pts, wts = _emp_points(emp)
    grid = np.union1d(pts, spec.breakpoints())
    total = 0.0
    cum = np.concatenate([[0.0], np.cumsum(wts)])
    for a, b in zip(grid[:-1], grid[1:]):
        fe = cum[np.searchsorted(pts, a, side="right")]
        ga = float(spec.cdf(a)) - fe          # right limit at a
        gb = float(spec.cdf_left(b)) - fe     # left limit at b
        w = b - a
        if ga * gb >= 0:
            total += 0.5 * abs(ga + gb) * w
        else:
            r = ga / (ga - gb)                # root position in [0, 1]
            total += 0.5 * w * (abs(ga) * r + abs(gb) * (1.0 - r))
    return total


def tv_atoms(est: EmpiricalMeasure, spec: DistributionSpec) -> float:
    """Half the l1 distance between the atomic weight maps."""
    sw = spec.atom_weights()
    keys = set(est.atom_weights) | set(sw)
    return 0.5 * sum(abs(est.atom_weights.get(k, 0.0) - sw.get(k, 0.0)) for k in keys)


def continuous_sample_measure(emp: EmpiricalMeasure,
                              exclude_values) -> Optional[EmpiricalMeasure]:
    """The sample measure with the given (atom) values removed, renormalized."""
    if emp.samples is None or not emp.samples.size:
        return None
    keep = ~np.isin(emp.samples, np.asarray(sorted(exclude_values), dtype=float))
    if not keep.any():
        return None
    w = None
    if emp.sample_weights is not None:
        w = emp.sample_weights[keep]
        w = w / w.sum()
    return EmpiricalMeasure(samples=emp.samples[keep], sample_weights=w)


def law_distance(emp: EmpiricalMeasure, spec: DistributionSpec,
                 atoms_est: Optional[EmpiricalMeasure] = None) -> LawDistance:
    n = int(emp.samples.size) if emp.samples is not None else 0
    return LawDistance(
        ks=ks_distance(emp, spec),
        wasserstein1=wasserstein1_distance(emp, spec),
        tv_atoms=tv_atoms(atoms_est if atoms_est is not None else emp, spec),
        n_samples=n,
    )


# ---------------------------------------------------------------------------
# sweeps


SWEEP_COLUMNS = ["n_steps", "seed", "situation", "case", "ks", "w1", "tv_atoms",
                 "atoms_correct", "atoms_total", "match_length", "oriented",
                 "error", "wall_ms"]


def run_replica(cfg: ExperimentConfig, with_env: bool = False) -> dict:
    """One simulate -> corrupt -> reconstruct pass; returns a sweep row."""
    from .walk import corrupt, observe, simulate  # deferred: numba warmup cost

    t0 = time.perf_counter()
    row = {c: "" for c in SWEEP_COLUMNS}
    row.update({"n_steps": cfg.n_steps, "seed": cfg.walk_seed,
                "situation": cfg.situation.value, "case": cfg.case})
    try:
        env = Environment(cfg.rho, cfg.env_seed)
        traj = simulate(env, cfg.n_steps, cfg.walk_seed, cfg.situation)
        chi_prime = observe(traj, env, cfg.situation)
        run = corrupt(chi_prime, cfg.p, cfg.nu, cfg.noise_seed, cfg.situation)
        rec = cfg.reconstruction
        report = reconstruct_law(
            run.chi, cfg.situation, cfg.case, p=cfg.p, kappa=cfg.kappa,
            min_repeats=rec.min_repeats, h_floor=rec.h_floor, se_mult=rec.se_mult,
            known_m=cfg.known_m, known_which=cfg.known_which,
            repeat_threshold=rec.repeat_threshold)

        true_rho_atoms = set(cfg.rho.atom_values)
        true_nu_atoms = set(cfg.nu.atom_values)
        labeled = [c for c in report.classification
                   if c.value in true_rho_atoms | true_nu_atoms]
        correct = sum(
            1 for c in labeled
            if (c.label is Label.RHO_ATOM and c.value in true_rho_atoms)
            or (c.label is Label.NU_ATOM and c.value in true_nu_atoms))
        row["atoms_correct"] = correct
        row["atoms_total"] = len(true_rho_atoms | true_nu_atoms)

        if report.law is not None:
            if report.fresh_values.size and cfg.rho.uniforms:
                cont = cfg.rho.continuous_part()
                emp = continuous_sample_measure(
                    report.law if report.law.samples.size
                    else EmpiricalMeasure(samples=report.fresh_values),
                    true_rho_atoms)
                if emp is not None:
                    row["ks"] = ks_distance(emp, cont)
                    row["w1"] = wasserstein1_distance(emp, cont)
            atoms_est = EmpiricalMeasure(
                samples=np.empty(0),
                atom_weights={v: w for v, w in report.law.atom_weights.items()
                              if v in true_rho_atoms})
            row["tv_atoms"] = tv_atoms(atoms_est, cfg.rho)

        if with_env:
            recon = orient(assemble(run.chi, report, cfg.reconstruction.max_extent),
                           run.chi, cfg.situation)
            sites = env.realized
            radius = max(abs(min(sites)), abs(max(sites))) + recon.values.shape[0]
            _, match_len, _ = align_score(recon, env, search_radius=radius)
            row["match_length"] = match_len
            row["oriented"] = recon.oriented
    except Exception as exc:  # noqa: BLE001 - per-row error isolation
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_ms"] = round((time.perf_counter() - t0) * 1000.0, 1)
    return row


def _sweep_point(args) -> dict:
    base, n_steps, seed, with_env = args
    cfg = replace(base, n_steps=int(n_steps), env_seed=base.env_seed + seed,
                  walk_seed=base.walk_seed + seed, noise_seed=base.noise_seed + seed)
    row = run_replica(cfg, with_env=with_env)
    row["seed"] = seed
    return row


def sweep(base: ExperimentConfig, grid: list[tuple[int, int]],
          with_env: bool = False, threads: int = 1) -> list[dict]:
    """Run the pipeline over (n_steps, seed) grid points, one row each.

    Seeds offset all three streams so replicas are independent; failures are
    recorded in the row's error column and the sweep continues.  Rows come
    back in grid order regardless of completion order."""
    points = [(base, n, s, with_env) for n, s in grid]
    if threads > 1 and len(points) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(_sweep_point, points))
    return [_sweep_point(pt) for pt in points]


def sweep_to_csv(rows: list[dict], path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for row in rows:
            fh.write(",".join(_cell(row.get(c, "")) for c in SWEEP_COLUMNS) + "\n")


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, bool):
        return str(v).lower()
    s = str(v)
    return '"' + s.replace('"', '""') + '"' if ("," in s or '"' in s) else s
