"""Simulated gate tuning with Bayesian randomized benchmarking and SPSA."""

from .channels import DensityOperator, MeasurementEffect, Superoperator, agf
from .clifford import GroupTable, clifford_group, n_bar
from .config import ConfigError, ExperimentConfig, load_config
from .rb import DeviceModel, true_objective, true_rb_params
from .reuse import LipschitzBudget, corner_set, diffuse
from .rng import RngStreams
from .smc import ParticleEnsemble, ParticleFilter, PriorSpec, RBParams
from .spsa import SpsaConfig, Tuner, TuneTrace

__all__ = [
    "ConfigError", "DensityOperator", "DeviceModel", "ExperimentConfig", "GroupTable",
    "LipschitzBudget", "MeasurementEffect", "ParticleEnsemble", "ParticleFilter",
    "PriorSpec", "RBParams", "RngStreams", "SpsaConfig", "Superoperator", "TuneTrace",
    "Tuner", "agf", "clifford_group", "corner_set", "diffuse", "load_config", "n_bar",
    "true_objective", "true_rb_params",
]
