"""Comparison estimators sharing the GAMP/SBL core with frozen assignments."""

from __future__ import annotations

import enum

import numpy as np

from . import estimator
from .simulate import ClusterMap, Observation, SystemConfig


class BaselineKind(str, enum.Enum):
    SEPARATE = "Separate"
    GIVEN_CLUSTER = "GivenCluster"
    SCS_ARRAY = "ScsArray"


def one_hot_phi(assignment: np.ndarray, n_clusters: int) -> np.ndarray:
    phi = np.zeros((len(assignment), n_clusters))
    phi[np.arange(len(assignment)), assignment] = 1.0
    return phi


def run_separate(config: SystemConfig, observation: Observation, **kwargs) -> estimator.EstimateReport:
    """Per-antenna SBL: each antenna is its own component, no support sharing."""
    m_tot = observation.received.shape[0]
    return estimator.run(config, observation, phi_fixed=np.eye(m_tot), **kwargs)


def run_given_cluster(
    config: SystemConfig, observation: Observation, true_map: ClusterMap, **kwargs
) -> estimator.EstimateReport:
    """Oracle-cluster SBL: tap precisions shared within the true clusters."""
    phi = one_hot_phi(true_map.assignment, true_map.n_clusters)
    return estimator.run(config, observation, phi_fixed=phi, **kwargs)


def run_scs_array(config: SystemConfig, observation: Observation, **kwargs) -> estimator.EstimateReport:
    """Whole-array SBL: one shared precision vector for every antenna."""
    m_tot = observation.received.shape[0]
    return estimator.run(config, observation, phi_fixed=np.ones((m_tot, 1)), **kwargs)
