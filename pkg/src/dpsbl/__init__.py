"""DP-SBL channel estimation for massive MIMO-OFDM: simulator, estimators, benchmark."""

from .simulate import (
    ChannelRealization,
    ClusterMap,
    ConfigError,
    HyperParams,
    Observation,
    SystemConfig,
    build_observation,
    generate_channel,
    generate_cluster_map,
    simulate,
)
from .estimator import EstimateReport, EstimatorDivergenceError, run as run_dirichlet_mp
from .baselines import BaselineKind, run_given_cluster, run_scs_array, run_separate
from .bench import ExperimentReport, ExperimentSpec, compute_mse, emit_csv, run_experiment

__all__ = [
    "BaselineKind",
    "ChannelRealization",
    "ClusterMap",
    "ConfigError",
    "EstimateReport",
    "EstimatorDivergenceError",
    "ExperimentReport",
    "ExperimentSpec",
    "HyperParams",
    "Observation",
    "SystemConfig",
    "build_observation",
    "compute_mse",
    "emit_csv",
    "generate_channel",
    "generate_cluster_map",
    "run_dirichlet_mp",
    "run_experiment",
    "run_given_cluster",
    "run_scs_array",
    "run_separate",
    "simulate",
]

__version__ = "0.1.0"
