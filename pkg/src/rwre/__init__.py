"""Simulation and inference for one-dimensional random walks in random
environment observed through a noisy channel: reconstruct the environment
law, and the environment itself up to translation, from the corrupted
observation stream alone."""

from .config import ExperimentConfig, load_config
from .distributions import (
    DistributionSpec,
    DistributionStats,
    Situation,
    check_recurrent_site,
    compute_stats,
    symmetrize,
    validate_spec,
)
from .environment import Environment
from .law import (
    EmpiricalMeasure,
    Label,
    LawReconstructor,
    ReconstructionReport,
    ValueClass,
    empirical_law,
    reconstruct_law,
)
from .metrics import (
    LawDistance,
    ks_distance,
    law_distance,
    sweep,
    tv_atoms,
    wasserstein1_distance,
)
from .scenery import (
    CrossingString,
    EnvironmentReconstructor,
    ReconstructedEnvironment,
    align_score,
    assemble,
    filter_clean,
    orient,
    shortest_crossings,
)
from .walk import ObservationRun, Trajectory, corrupt, observe, simulate, step_prob_right

__all__ = [
    "DistributionSpec", "DistributionStats", "Situation", "validate_spec",
    "compute_stats", "check_recurrent_site", "symmetrize", "Environment",
    "Trajectory", "ObservationRun", "simulate", "observe", "corrupt",
    "step_prob_right", "Label", "ValueClass", "EmpiricalMeasure",
    "empirical_law", "reconstruct_law", "ReconstructionReport",
    "LawReconstructor", "CrossingString", "ReconstructedEnvironment",
    "shortest_crossings", "filter_clean", "assemble", "orient", "align_score",
    "EnvironmentReconstructor", "LawDistance", "ks_distance",
    "wasserstein1_distance", "tv_atoms", "law_distance", "sweep",
    "ExperimentConfig", "load_config",
]

__version__ = "0.1.0"
