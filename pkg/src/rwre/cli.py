"""Experiment driver: simulate, reconstruct-law, reconstruct-env, sweep.

Exit codes: 0 success, 2 config validation failure, 3 reconstruction
failure, 4 IO failure.  All outputs are written atomically (temp + rename)
and are bit-identical across reruns with the same config.
"""

from __future__ import annotations

import os
import sys
import tempfile
from pathlib import Path

import click

from .config import ExperimentConfig, load_config
from .environment import Environment
from .errors import ConfigError, RwreError
from .law import classification_to_csv, reconstruct_law, report_to_json
from .metrics import law_distance, sweep as run_sweep, sweep_to_csv
from .scenery import align_score, assemble, env_to_csv, orient
from .walk import chi_from_csv, corrupt, observe, run_to_csv, simulate

EXIT_CONFIG = 2
EXIT_RECONSTRUCT = 3
EXIT_IO = 4


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("RWRE_THREADS", "1")))
    except ValueError:
        return 1


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _load(config_path) -> ExperimentConfig:
    try:
        return load_config(config_path)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))


def _atomic(path: Path, writer) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def _outdir(cfg: ExperimentConfig, out) -> Path:
    return Path(out) if out else Path(cfg.output_dir)


def _pipeline_inputs(cfg: ExperimentConfig, evaluate: bool):
    env = Environment(cfg.rho, cfg.env_seed)
    traj = simulate(env, cfg.n_steps, cfg.walk_seed, cfg.situation)
    chi_prime = observe(traj, env, cfg.situation)
    run = corrupt(chi_prime, cfg.p, cfg.nu, cfg.noise_seed, cfg.situation,
                  keep_truth=evaluate, trajectory=traj if evaluate else None)
    return env, traj, run


@click.group()
def main():
    """Random-walk-in-random-environment simulation and reconstruction."""


@main.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=False))
@click.option("--out", default=None, type=click.Path())
@click.option("--eval", "evaluate", is_flag=True, help="retain hidden truth columns")
def simulate_cmd(config_path, out, evaluate):
    """Generate the corrupted observation stream."""
    cfg = _load(config_path)
    evaluate = evaluate or cfg.evaluation
    env, traj, run = _pipeline_inputs(cfg, evaluate)
    outdir = _outdir(cfg, out)
    try:
        _atomic(outdir / "chi.csv", lambda tmp: run_to_csv(run, tmp))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    x = traj.positions
    frac = float(run.xi.mean()) if run.xi is not None else cfg.p
    click.echo(f"n={cfg.n_steps} range=[{x.min()},{x.max()}] "
               f"corrupted={frac:.4f} -> {outdir / 'chi.csv'}")


def _load_chi(cfg, chi, out):
    path = Path(chi) if chi else _outdir(cfg, out) / "chi.csv"
    if not path.exists():
        _fail(EXIT_IO, f"chi file not found: {path}")
    return chi_from_csv(path)


@main.command("reconstruct-law")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--chi", default=None, type=click.Path())
@click.option("--out", default=None, type=click.Path())
def reconstruct_law_cmd(config_path, chi, out):
    """Estimate the environment law from the stream alone."""
    cfg = _load(config_path)
    stream, _ = _load_chi(cfg, chi, out)
    rec = cfg.reconstruction
    try:
        report = reconstruct_law(
            stream, cfg.situation, cfg.case, p=cfg.p, kappa=cfg.kappa,
            min_repeats=rec.min_repeats, h_floor=rec.h_floor, se_mult=rec.se_mult,
            known_m=cfg.known_m, known_which=cfg.known_which,
            repeat_threshold=rec.repeat_threshold)
    except RwreError as exc:
        _fail(EXIT_RECONSTRUCT, f"{type(exc).__name__}: {exc}")
    outdir = _outdir(cfg, out)
    if (cfg.evaluation and cfg.rho.uniforms and report.law is not None
            and report.law.samples.size):
        from .metrics import continuous_sample_measure

        emp = continuous_sample_measure(report.law, cfg.rho.atom_values)
        if emp is not None:
            d = law_distance(emp, cfg.rho.continuous_part())
            report.diagnostics["law_distance"] = {
                "ks": d.ks, "wasserstein1": d.wasserstein1, "n_samples": d.n_samples}
    try:
        _atomic(outdir / "report.json",
                lambda tmp: report_to_json(report, tmp, None))
        _atomic(outdir / "samples.csv", lambda tmp: _write_samples(report, tmp))
        _atomic(outdir / "classification.csv",
                lambda tmp: classification_to_csv(report, tmp))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(f"classified {len(report.classification)} candidates, "
               f"{report.fresh_values.size} fresh observations -> {outdir}")


def _write_samples(report, tmp):
    with open(tmp, "w") as fh:
        fh.write("value\n")
        for v in report.fresh_values:
            fh.write(repr(float(v)) + "\n")


@main.command("reconstruct-env")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--chi", default=None, type=click.Path())
@click.option("--out", default=None, type=click.Path())
def reconstruct_env_cmd(config_path, chi, out):
    """Rebuild a window of the environment up to translation."""
    cfg = _load(config_path)
    if not cfg.rho.uniforms:
        _fail(EXIT_CONFIG, "environment reconstruction requires a law with a "
                           "continuous part (the anchors are its realizations)")
    stream, _ = _load_chi(cfg, chi, out)
    rec = cfg.reconstruction
    try:
        report = reconstruct_law(
            stream, cfg.situation, cfg.case, p=cfg.p, kappa=cfg.kappa,
            min_repeats=rec.min_repeats, h_floor=rec.h_floor, se_mult=rec.se_mult)
        recon = orient(assemble(stream, report, rec.max_extent), stream, cfg.situation)
    except RwreError as exc:
        hint = (" (try a larger n_steps)" if "Anchor" in type(exc).__name__ else "")
        _fail(EXIT_RECONSTRUCT, f"{type(exc).__name__}: {exc}{hint}")
    best_shift = None
    if cfg.evaluation:
        env, _, _ = _pipeline_inputs(cfg, False)
        sites = env.realized
        radius = max(abs(min(sites)), abs(max(sites))) + recon.values.shape[0]
        shift, match_len, exact = align_score(recon, env, radius)
        best_shift = shift
        click.echo(f"align: shift={shift} match_length={match_len} exact={exact}")
    outdir = _outdir(cfg, out)
    try:
        _atomic(outdir / "environment.csv",
                lambda tmp: env_to_csv(recon, tmp, best_shift))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(f"assembled {recon.values.shape[0]} values "
               f"(oriented={recon.oriented}) -> {outdir / 'environment.csv'}")


def parse_grid(grid: str) -> list[tuple[int, int]]:
    """'n1,n2,...xS' -> [(n, seed) for each n, seed in 1..S]."""
    try:
        ns_part, _, seeds_part = grid.partition("x")
        ns = [int(t) for t in ns_part.split(",") if t]
        n_seeds = int(seeds_part) if seeds_part else 1
        if not ns or n_seeds < 1:
            raise ValueError
    except ValueError:
        raise ConfigError(f"bad grid spec {grid!r}, expected 'n1,n2,...xS'") from None
    return [(n, s) for n in ns for s in range(1, n_seeds + 1)]


@main.command("sweep")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--grid", required=True, help="'n1,n2,...xS' trajectory lengths x seeds")
@click.option("--out", default=None, type=click.Path())
@click.option("--with-env", is_flag=True, help="also assemble the environment per row")
def sweep_cmd(config_path, grid, out, with_env):
    """Run the full pipeline over a grid of (n_steps, seed) points."""
    cfg = _load(config_path)
    try:
        points = parse_grid(grid)
    except ConfigError as exc:
        _fail(EXIT_CONFIG, str(exc))
    rows = run_sweep(cfg, points, with_env=with_env, threads=_threads())
    outdir = _outdir(cfg, out)
    try:
        _atomic(outdir / "sweep.csv", lambda tmp: sweep_to_csv(rows, tmp))
    except OSError as exc:
        _fail(EXIT_IO, str(exc))
    n_err = sum(1 for r in rows if r["error"])
    click.echo(f"{len(rows)} rows ({n_err} with errors) -> {outdir / 'sweep.csv'}")


if __name__ == "__main__":
    main()
