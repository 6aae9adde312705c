"""Experiment configuration: YAML schema, validation, case resolution."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from .distributions import DistributionSpec, Situation
from .errors import ConfigError


@dataclass
class ReconstructionParams:
    min_repeats: int = 2
    h_floor: Optional[float] = None   # default 10 / n_steps at use site
    se_mult: float = 3.0
    repeat_threshold: int = 10
    max_extent: int = 64


@dataclass
class ExperimentConfig:
    situation: Situation
    rho: DistributionSpec
    nu: DistributionSpec
    p: float
    n_steps: int
    env_seed: int
    walk_seed: int
    noise_seed: int
    case_hint: str = "auto"           # auto | case_a | case_b
    p_known: bool = True
    known_m: Optional[int] = None
    known_which: str = "rho"
    reconstruction: ReconstructionParams = field(default_factory=ReconstructionParams)
    evaluation: bool = False
    output_dir: str = "out"

    @property
    def case(self) -> str:
        """'a' when the environment law has a continuous part, else 'b'."""
        if self.case_hint == "case_a":
            return "a"
        if self.case_hint == "case_b":
            return "b"
        return "a" if self.rho.uniforms else "b"

    @property
    def kappa(self) -> float:
        return self.rho.support_bound

    def validate(self) -> "ExperimentConfig":
        try:
            self.rho.validate()
            self.nu.validate()
        except Exception as exc:
            raise ConfigError(str(exc)) from exc
        if self.situation is not self.rho.situation or self.situation is not self.nu.situation:
            raise ConfigError("rho/nu situation does not match the experiment situation")
        overlap = set(self.rho.atom_values) & set(self.nu.atom_values)
        if overlap:
            raise ConfigError(
                f"environment and noise atoms must have disjoint support, shared: {sorted(overlap)}")
        if not 0.0 <= self.p < 1.0:
            raise ConfigError(f"p={self.p} must lie in [0, 1)")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be >= 1")
        if self.case_hint not in ("auto", "case_a", "case_b"):
            raise ConfigError(f"unknown case_hint {self.case_hint!r}")
        if (self.situation is Situation.SITE and self.case == "b"
                and self.p_known and self.known_m is None):
            kap = self.kappa
            bound = kap / (kap + 1.0)
            if not 0.0 < self.p < bound:
                raise ConfigError(
                    f"purely atomic site reconstruction needs 0 < p < kappa/(kappa+1) "
                    f"= {bound:.6g}, got p={self.p}")
        return self


def _spec_from_dict(d: dict, situation: Situation, name: str) -> DistributionSpec:
    if not isinstance(d, dict):
        raise ConfigError(f"section {name!r} must be a mapping")
    bound_key = "kappa" if situation is Situation.SITE else "D"
    if bound_key not in d:
        raise ConfigError(f"section {name!r} needs the support bound {bound_key!r}")
    atoms = tuple((float(v), float(w)) for v, w in d.get("atoms", []))
    uniforms = tuple((float(a), float(b), float(w)) for a, b, w in d.get("uniforms", []))
    return DistributionSpec(situation=situation, atoms=atoms, uniforms=uniforms,
                            support_bound=float(d[bound_key]))


def config_from_dict(doc: dict) -> ExperimentConfig:
    try:
        situation = Situation(doc["situation"])
        seeds = doc.get("seeds", {})
        known = doc.get("known") or {}
        rec = doc.get("reconstruction") or {}
        cfg = ExperimentConfig(
            situation=situation,
            rho=_spec_from_dict(doc["rho"], situation, "rho"),
            nu=_spec_from_dict(doc["nu"], situation, "nu"),
            p=float(doc["p"]),
            n_steps=int(doc["n_steps"]),
            env_seed=int(seeds.get("env", 1)),
            walk_seed=int(seeds.get("walk", 1)),
            noise_seed=int(seeds.get("noise", 1)),
            case_hint=str(doc.get("case_hint", "auto")),
            p_known=bool(known.get("p_known", True)),
            known_m=known.get("M"),
            known_which=str(known.get("which", "rho")),
            reconstruction=ReconstructionParams(
                min_repeats=int(rec.get("min_repeats", 2)),
                h_floor=(float(rec["h_floor"]) if "h_floor" in rec else None),
                se_mult=float(rec.get("se_mult", 3.0)),
                repeat_threshold=int(rec.get("repeat_threshold", 10)),
                max_extent=int(rec.get("max_extent", 64)),
            ),
            evaluation=bool(doc.get("evaluation", False)),
            output_dir=str(doc.get("output_dir", "out")),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    if not isinstance(doc, dict):
        raise ConfigError("config file must contain a mapping")
    return config_from_dict(doc)
