"""Quenched trajectory simulation and the noisy observation channel."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import walk_steps
from .distributions import DistributionSpec, Situation
from .environment import Environment
from .errors import PreconditionViolation, SupportViolation

_BLOCK = 1 << 20
_EXTEND = 512

# domain tags so equal integer seeds still yield independent streams
_WALK_DOMAIN = 0x57414C4B
_NOISE_DOMAIN = 0x434F5252


def _stream(seed: int, domain: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & (1 << 64) - 1, domain])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass
class Trajectory:
    positions: np.ndarray  # X_0 .. X_n, int64
    env_seed: int
    walk_seed: int


@dataclass
class ObservationRun:
    """The observable stream chi, plus the hidden truth when retained.

    ``start_index`` is 0 for site observations and 1 for bond observations
    (no edge has been crossed at time 0).
    """

    chi: np.ndarray
    start_index: int
    situation: Situation
    chi_prime: Optional[np.ndarray] = None
    xi: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    trajectory: Optional[Trajectory] = None

    @property
    def has_truth(self) -> bool:
        return self.chi_prime is not None


def step_prob_right(env: Environment, z: int, situation: Situation) -> float:
    """Probability of stepping from z to z + 1."""
    if situation is Situation.SITE:
        return env.value(z)
    wl = env.value(z - 1)
    wr = env.value(z)
    return wr / (wl + wr)


def _pright_window(env: Environment, lo: int, hi: int, situation: Situation) -> np.ndarray:
    if situation is Situation.SITE:
        return env.window(lo, hi)
    w = env.window(lo - 1, hi)
    return w[1:] / (w[:-1] + w[1:])


def simulate(env: Environment, n_steps: int, walk_seed: int,
             situation: Situation = Situation.SITE) -> Trajectory:
    """Run the nearest-neighbor chain from 0 for n_steps steps.

    Deterministic given (env, walk_seed): one uniform is consumed per step
    from a sequential PCG64 stream, independent of how the environment
    window gets extended.
    """
    if n_steps < 1:
        raise PreconditionViolation("n_steps must be >= 1")
    rng = _stream(walk_seed, _WALK_DOMAIN)
    positions = np.empty(n_steps + 1, dtype=np.int64)
    positions[0] = 0
    win_lo, win_hi = -_EXTEND, _EXTEND
    pright = _pright_window(env, win_lo, win_hi, situation)
    pos = 0
    done = 0
    us = np.empty(0)
    uoff = 0
    while done < n_steps:
        if uoff >= us.shape[0]:
            us = rng.random(min(_BLOCK, n_steps - done))
            uoff = 0
        taken, pos = walk_steps(pright, win_lo, pos, us[uoff:], positions, done + 1)
        done += taken
        uoff += taken
        if done < n_steps and uoff < us.shape[0]:
            # stopped at the window rim: realize more environment
            if pos - win_lo <= 1:
                win_lo -= _EXTEND
            if win_hi - pos <= 1:
                win_hi += _EXTEND
            pright = _pright_window(env, win_lo, win_hi, situation)
    return Trajectory(positions=positions, env_seed=env.seed, walk_seed=walk_seed)


def observe(traj: Trajectory, env: Environment, situation: Situation) -> np.ndarray:
    """The uncorrupted observation stream chi'.

    Site: chi'(n) = omega(X_n), n >= 0.  Bond: chi'(n) = omega of the edge
    just crossed, n >= 1 (array index 0 holds n = 1).
    """
    x = traj.positions
    if situation is Situation.SITE:
        lo, hi = int(x.min()), int(x.max())
        w = env.window(lo, hi)
        return w[x - lo]
    if x.shape[0] < 2:
        raise PreconditionViolation("bond observation needs at least one step")
    edges = np.minimum(x[:-1], x[1:])
    lo, hi = int(edges.min()), int(edges.max())
    w = env.window(lo, hi)
    return w[edges - lo]


def corrupt(chi_prime: np.ndarray, p: float, nu: DistributionSpec, noise_seed: int,
            situation: Situation, keep_truth: bool = False,
            trajectory: Optional[Trajectory] = None) -> ObservationRun:
    """Replace each entry independently with probability p by a draw from nu."""
    if not 0.0 <= p < 1.0:
        raise PreconditionViolation("p must lie in [0, 1)")
    nu.validate()
    lo, hi = nu.support_interval
    if situation is Situation.SITE:
        if not (0.0 <= lo and hi <= 1.0):
            raise SupportViolation("site noise law must live inside (0, 1)")
    n = chi_prime.shape[0]
    rng = _stream(noise_seed, _NOISE_DOMAIN)
    xi = rng.random(n) < p
    y = nu.sample_from_uniforms(rng.random(n), rng.random(n))
    chi = np.where(xi, y, chi_prime)
    start = 0 if situation is Situation.SITE else 1
    if keep_truth:
        return ObservationRun(chi=chi, start_index=start, situation=situation,
                              chi_prime=chi_prime, xi=xi.astype(np.uint8), y=y,
                              trajectory=trajectory)
    return ObservationRun(chi=chi, start_index=start, situation=situation)


def run_to_csv(run: ObservationRun, path) -> None:
    """Serialize a run; floats use shortest round-trip decimals."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if run.has_truth:
            w.writerow(["n", "chi", "x", "chi_prime", "xi", "y"])
            x = run.trajectory.positions[run.start_index:] if run.trajectory is not None else None
            for i in range(run.chi.shape[0]):
                w.writerow([i + run.start_index, repr(float(run.chi[i])),
                            int(x[i]) if x is not None else "",
                            repr(float(run.chi_prime[i])), int(run.xi[i]),
                            repr(float(run.y[i]))])
        else:
            w.writerow(["n", "chi"])
            for i in range(run.chi.shape[0]):
                w.writerow([i + run.start_index, repr(float(run.chi[i]))])


def chi_from_csv(path) -> tuple[np.ndarray, int]:
    """Read back the chi column and the start index."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        ci = header.index("chi")
        ns = []
        vals = []
        for row in r:
            ns.append(int(row[0]))
            vals.append(float(row[ci]))
    start = ns[0] if ns else 0
    return np.array(vals), start
