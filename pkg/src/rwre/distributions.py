"""Mixture laws for the environment and the noise channel.

A law is a finite mixture of point atoms and uniform densities on open
intervals.  Site laws live strictly inside (kappa, 1 - kappa), bond
(conductance) laws strictly inside (D, 1/D).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .errors import DuplicateAtom, PreconditionViolation, SupportViolation, WeightSumError

WEIGHT_TOL = 1e-12
RECURRENCE_TOL = 1e-9


class Situation(enum.Enum):
    SITE = "site"
    BOND = "bond"


@dataclass(frozen=True)
class DistributionSpec:
    """Atoms + uniform pieces, with a declared ellipticity bound.

    ``support_bound`` is kappa for site laws (support inside
    (kappa, 1 - kappa)) and D for bond laws (support inside (D, 1/D)).
    """

    situation: Situation
    atoms: tuple[tuple[float, float], ...] = ()
    uniforms: tuple[tuple[float, float, float], ...] = ()
    support_bound: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((float(v), float(w)) for v, w in self.atoms))
        object.__setattr__(
            self, "uniforms", tuple((float(a), float(b), float(w)) for a, b, w in self.uniforms)
        )

    @property
    def support_interval(self) -> tuple[float, float]:
        b = self.support_bound
        if self.situation is Situation.SITE:
            return (b, 1.0 - b)
        return (b, 1.0 / b) if b > 0 else (0.0, math.inf)

    @property
    def atom_values(self) -> tuple[float, ...]:
        return tuple(v for v, _ in self.atoms)

    @property
    def atom_weight_total(self) -> float:
        return sum(w for _, w in self.atoms)

    @property
    def is_purely_atomic(self) -> bool:
        return not self.uniforms

    def validate(self) -> "DistributionSpec":
        total = self.atom_weight_total + sum(w for _, _, w in self.uniforms)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise WeightSumError(f"mixture weights sum to {total!r}, expected 1")
        lo, hi = self.support_interval
        for v, w in self.atoms:
            if not (lo < v < hi):
                raise SupportViolation(f"atom {v} outside support ({lo}, {hi})")
            if w < 0:
                raise WeightSumError(f"negative atom weight {w}")
        for a, b, w in self.uniforms:
            if not a < b:
                raise SupportViolation(f"uniform piece ({a}, {b}) has lower >= upper")
            if not (lo < a and b < hi):
                raise SupportViolation(f"uniform piece ({a}, {b}) outside support ({lo}, {hi})")
            if w < 0:
                raise WeightSumError(f"negative piece weight {w}")
        values = self.atom_values
        if len(set(values)) != len(values):
            raise DuplicateAtom(f"duplicate atom values in {values}")
        return self

    # -- probability functions -------------------------------------------------

    def cdf(self, x: np.ndarray | float) -> np.ndarray | float:
        """P(omega <= x)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for v, w in self.atoms:
            out = out + w * (x >= v)
        for a, b, w in self.uniforms:
            out = out + w * np.clip((x - a) / (b - a), 0.0, 1.0)
        return out

    def cdf_left(self, x: np.ndarray | float) -> np.ndarray | float:
        """P(omega < x)."""
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for v, w in self.atoms:
            out = out + w * (x > v)
        for a, b, w in self.uniforms:
            out = out + w * np.clip((x - a) / (b - a), 0.0, 1.0)
        return out

    def breakpoints(self) -> np.ndarray:
        pts = [v for v, _ in self.atoms]
        for a, b, _ in self.uniforms:
            pts.extend((a, b))
        return np.array(sorted(set(pts)), dtype=float)

    # -- sampling ---------------------------------------------------------------

    def sample_from_uniforms(self, u_comp: np.ndarray, u_pos: np.ndarray) -> np.ndarray:
        """Map two uniform-(0,1) arrays to mixture draws.

        Atom draws reproduce the stored atom value bit-exactly; continuous
        draws interpolate within their piece.  Pure function of the inputs.
        """
        u_comp = np.atleast_1d(np.asarray(u_comp, dtype=float))
        u_pos = np.atleast_1d(np.asarray(u_pos, dtype=float))
        out = np.empty_like(u_comp)
        edges = [0.0]
        for _, w in self.atoms:
            edges.append(edges[-1] + w)
        for _, _, w in self.uniforms:
            edges.append(edges[-1] + w)
        edges = np.array(edges)
        idx = np.clip(np.searchsorted(edges, u_comp, side="right") - 1, 0, len(edges) - 2)
        n_atoms = len(self.atoms)
        for j, (v, _) in enumerate(self.atoms):
            out[idx == j] = v
        for j, (a, b, _) in enumerate(self.uniforms):
            m = idx == n_atoms + j
            out[m] = a + u_pos[m] * (b - a)
        return out

    # -- moments ----------------------------------------------------------------

    def mean(self) -> float:
        m = sum(v * w for v, w in self.atoms)
        m += sum(w * 0.5 * (a + b) for a, b, w in self.uniforms)
        return m

    def expect(self, f, tol: float = 1e-12) -> float:
        """E f(omega) by exact atom sums plus quadrature over the pieces."""
        total = sum(w * f(v) for v, w in self.atoms)
        for a, b, w in self.uniforms:
            integral, _ = quad(f, a, b, epsabs=tol, epsrel=tol, limit=200)
            total += w * integral / (b - a)
        return total

    def expect_ratio(self, alpha: float) -> float:
        """E(alpha / (alpha + omega)), closed form over atoms and pieces."""
        total = sum(w * alpha / (alpha + v) for v, w in self.atoms)
        for a, b, w in self.uniforms:
            total += w * alpha * math.log((alpha + b) / (alpha + a)) / (b - a)
        return total

    def continuous_part(self) -> "DistributionSpec":
        """The non-atomic part, renormalized to a probability law."""
        w_cont = sum(w for _, _, w in self.uniforms)
        if w_cont <= 0:
            raise PreconditionViolation("law has no continuous part")
        pieces = tuple((a, b, w / w_cont) for a, b, w in self.uniforms)
        return DistributionSpec(self.situation, (), pieces, self.support_bound)

    def atom_weights(self) -> dict[float, float]:
        return {v: w for v, w in self.atoms}


@dataclass(frozen=True)
class DistributionStats:
    """Derived moments of an environment law."""

    mean: float
    z_norm: float | None = None          # 2 E omega, bond only
    log_odds_mean: float | None = None   # E log(omega / (1 - omega)), site only
    log_odds_var: float | None = None    # E (log(omega / (1 - omega)))^2, site only


def validate_spec(spec: DistributionSpec) -> DistributionSpec:
    return spec.validate()


def compute_stats(spec: DistributionSpec) -> DistributionStats:
    mean = spec.mean()
    if spec.situation is Situation.BOND:
        return DistributionStats(mean=mean, z_norm=2.0 * mean)
    log_odds = lambda x: math.log(x / (1.0 - x))
    lom = spec.expect(log_odds)
    lov = spec.expect(lambda x: log_odds(x) ** 2)
    return DistributionStats(mean=mean, log_odds_mean=lom, log_odds_var=lov)


def check_recurrent_site(stats: DistributionStats, tol: float = RECURRENCE_TOL) -> bool:
    """Recurrence criterion: zero mean log-odds with nondegenerate spread."""
    if stats.log_odds_mean is None or stats.log_odds_var is None:
        raise PreconditionViolation("recurrence check requires site statistics")
    return abs(stats.log_odds_mean) <= tol and stats.log_odds_var > 0.0


def symmetrize(spec: DistributionSpec) -> DistributionSpec:
    """Mix a site law with its image under omega -> 1 - omega, weights 1/2 each.

    The result has exactly zero mean log-odds by symmetry.  Components that
    coincide with their own reflection are merged so the map is idempotent.
    """
    if spec.situation is not Situation.SITE:
        raise PreconditionViolation("symmetrize is defined for site laws only")

    def _snap(x, keys, tol=1e-12):
        # reflecting twice can be off by one ulp; merge onto an existing key
        for k in keys:
            if abs(k - x) <= tol:
                return k
        return x

    atoms: dict[float, float] = {}
    for v, w in spec.atoms:
        for val in (v, 1.0 - v):
            val = _snap(val, atoms)
            atoms[val] = atoms.get(val, 0.0) + 0.5 * w
    pieces: dict[tuple[float, float], float] = {}
    for a, b, w in spec.uniforms:
        for lo_, hi_ in ((a, b), (1.0 - b, 1.0 - a)):
            key = None
            for k in pieces:
                if abs(k[0] - lo_) <= 1e-12 and abs(k[1] - hi_) <= 1e-12:
                    key = k
                    break
            if key is None:
                key = (lo_, hi_)
            pieces[key] = pieces.get(key, 0.0) + 0.5 * w
    out = DistributionSpec(
        Situation.SITE,
        tuple(sorted(atoms.items())),
        tuple((a, b, w) for (a, b), w in sorted(pieces.items())),
        spec.support_bound,
    )
    return out.validate()
