"""Sparse-common-support channel simulator for a massive MIMO-OFDM uplink.

Antennas on a rectangular grid are linked to their left/upper neighbors with
probability p; connected components share one sparse support. Channels are
tapped-delay-line with a truncated-DFT dictionary, observed on evenly spaced
pilot subcarriers in AWGN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np


class ConfigError(ValueError):
    """Invalid simulator or estimator configuration."""


@dataclass
class HyperParams:
    """Gamma hyper-priors: (a, b) for noise precision, (c, d) for tap
    precisions, (e, h_eta) for the concentration parameter."""

    a: float = 1e-4
    b: float = 1e-4
    c: float = 1e-4
    d: float = 1e-4
    e: float = 1.0
    h_eta: float = 1e-2

    def validate(self):
        for name in ("a", "b", "c", "d", "e", "h_eta"):
            if not (getattr(self, name) > 0):
                raise ConfigError(f"hyper parameter {name} must be > 0")


@dataclass
class SystemConfig:
    rows: int = 10
    cols: int = 10
    n_total: int = 512
    channel_len: int = 64
    n_nonzero: int = 8
    n_pilots: int = 28
    p: float = 0.8
    snr_db: float = 10.0
    max_iters: int = 20
    truncation: int | None = None  # mixture truncation; defaults to n_antennas
    hyper: HyperParams = field(default_factory=HyperParams)
    seed: int = 0

    @property
    def n_antennas(self) -> int:
        return self.rows * self.cols

    @property
    def k_trunc(self) -> int:
        return self.truncation if self.truncation is not None else self.n_antennas

    def validate(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("antenna grid must be at least 1x1")
        if not (0 < self.n_nonzero <= self.channel_len <= self.n_total):
            raise ConfigError("need 0 < n_nonzero <= channel_len <= n_total")
        if not (0 < self.n_pilots <= self.n_total):
            raise ConfigError("need 0 < n_pilots <= n_total")
        if not (0.0 <= self.p <= 1.0):
            raise ConfigError("p must lie in [0, 1]")
        if self.max_iters < 1:
            raise ConfigError("max_iters must be >= 1")
        if self.k_trunc < 1:
            raise ConfigError("truncation must be >= 1")
        self.hyper.validate()

    def override(self, **kwargs) -> "SystemConfig":
        hyper_keys = {k: v for k, v in kwargs.items() if hasattr(HyperParams(), k)}
        cfg_keys = {k: v for k, v in kwargs.items() if k not in hyper_keys}
        cfg = replace(self, **cfg_keys)
        if hyper_keys:
            cfg.hyper = replace(self.hyper, **hyper_keys)
        return cfg


@dataclass
class ClusterMap:
    assignment: np.ndarray  # per-antenna cluster index, dense labels
    n_clusters: int


@dataclass
class ChannelRealization:
    taps: np.ndarray  # (M, L) complex
    supports: list  # per-cluster sorted index arrays of size n_nonzero
    cluster_map: ClusterMap
    freq: np.ndarray  # (M, N) complex, taps pushed through the dictionary


@dataclass
class Observation:
    pilots: np.ndarray  # (N,) unit-modulus symbols
    pilot_indices: np.ndarray  # (N,) subcarrier indices
    dictionary: np.ndarray  # (N, L) truncated DFT
    received: np.ndarray  # (M, N)
    true_lambda: float


def substream(entropy, *key) -> np.random.Generator:
    """Deterministic child RNG: SeedSequence(entropy) with spawn key ``key``.

    ``entropy`` may be an int or a sequence of ints; this is the single split
    function used everywhere for reproducible parallel streams.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=entropy, spawn_key=key))


def _child_seq(entropy, *key) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=entropy, spawn_key=key)


def generate_cluster_map(rows: int, cols: int, p: float, rng: np.random.Generator) -> ClusterMap:
    """Group a rows x cols antenna grid into sparse-support clusters.

    Raster-scans the grid; every antenna draws an independent Bernoulli(p)
    link to its left neighbor and another to its upper neighbor. It joins
    the left neighbor's cluster when that link holds, otherwise the upper
    neighbor's cluster when that link holds, otherwise it starts a new
    cluster. Existing clusters are never merged. A full (rows, cols, 2)
    block of uniforms is always consumed so the stream layout does not
    depend on grid edges.
    """
    if rows < 1 or cols < 1:
        raise ConfigError("antenna grid must be at least 1x1")
    if not (0.0 <= p <= 1.0):
        raise ConfigError("p must lie in [0, 1]")
    links = rng.random((rows, cols, 2)) < p  # [..., 0]=left, [..., 1]=up
    assignment = np.empty(rows * cols, dtype=np.int64)
    n_clusters = 0
    for r in range(rows):
        for c in range(cols):
            i = r * cols + c
            if c > 0 and links[r, c, 0]:
                assignment[i] = assignment[i - 1]
            elif r > 0 and links[r, c, 1]:
                assignment[i] = assignment[i - cols]
            else:
                assignment[i] = n_clusters
                n_clusters += 1
    return ClusterMap(assignment=assignment, n_clusters=n_clusters)


def pilot_indices(config: SystemConfig) -> np.ndarray:
    """Evenly spaced pilot subcarriers: stride floor(n_total/N), starting at 0."""
    stride = config.n_total // config.n_pilots
    return stride * np.arange(config.n_pilots, dtype=np.int64)


def dictionary(config: SystemConfig) -> np.ndarray:
    """Truncated DFT: rows at the pilot subcarriers, first L columns."""
    k = pilot_indices(config)[:, None]
    ell = np.arange(config.channel_len)[None, :]
    return np.exp(-2j * np.pi * k * ell / config.n_total)


def generate_channel(config: SystemConfig, cluster_map: ClusterMap, rng) -> ChannelRealization:
    """Draw per-cluster supports and per-antenna tap amplitudes.

    ``rng`` is an int or SeedSequence; supports use child streams keyed by
    cluster index and amplitudes child streams keyed by antenna index, so a
    given antenna's amplitudes do not depend on the clustering.
    """
    config.validate()
    if isinstance(rng, np.random.SeedSequence):
        entropy, base_key = rng.entropy, tuple(rng.spawn_key)
    else:
        entropy, base_key = rng, ()
    m_tot, length, s = config.n_antennas, config.channel_len, config.n_nonzero
    supports = []
    for j in range(cluster_map.n_clusters):
        gen = substream(entropy, *base_key, 0, j)
        supports.append(np.sort(gen.choice(length, size=s, replace=False)))
    taps = np.zeros((m_tot, length), dtype=complex)
    scale = math.sqrt(1.0 / (2.0 * s))
    for m in range(m_tot):
        gen = substream(entropy, *base_key, 1, m)
        amp = scale * (gen.standard_normal(s) + 1j * gen.standard_normal(s))
        taps[m, supports[cluster_map.assignment[m]]] = amp
    freq = taps @ dictionary(config).T
    return ChannelRealization(taps=taps, supports=supports, cluster_map=cluster_map, freq=freq)


def build_observation(config: SystemConfig, realization: ChannelRealization, rng) -> Observation:
    """QPSK pilots plus AWGN calibrated so E||Xh||^2 / E||n||^2 hits snr_db."""
    config.validate()
    if isinstance(rng, np.random.SeedSequence):
        entropy, base_key = rng.entropy, tuple(rng.spawn_key)
    else:
        entropy, base_key = rng, ()
    n = config.n_pilots
    gen_pilot = substream(entropy, *base_key, 0)
    pilots = np.exp(0.5j * np.pi * gen_pilot.integers(0, 4, size=n))
    # per-component E|x_n h_n|^2 = 1 by construction, so the noise variance
    # is 10^(-snr/10) directly
    noise_var = 10.0 ** (-config.snr_db / 10.0)
    true_lambda = np.inf if noise_var == 0.0 else 1.0 / noise_var
    received = pilots[None, :] * realization.freq
    if noise_var > 0.0:
        scale = math.sqrt(noise_var / 2.0)
        for m in range(config.n_antennas):
            gen = substream(entropy, *base_key, 1, m)
            received[m] += scale * (gen.standard_normal(n) + 1j * gen.standard_normal(n))
    return Observation(
        pilots=pilots,
        pilot_indices=pilot_indices(config),
        dictionary=dictionary(config),
        received=received,
        true_lambda=true_lambda,
    )


def simulate(config: SystemConfig, entropy=None):
    """Draw (cluster map, channel, observation) from config.seed or ``entropy``."""
    if entropy is None:
        entropy = config.seed
    cmap = generate_cluster_map(config.rows, config.cols, config.p, substream(entropy, 0))
    realization = generate_channel(config, cmap, _child_seq(entropy, 1))
    observation = build_observation(config, realization, _child_seq(entropy, 2))
    return cmap, realization, observation


def dump_matrix(matrix: np.ndarray, path) -> None:
    """Plain-text matrix dump: 'rows cols' header, then row-major complex tokens."""
    arr = np.atleast_2d(np.asarray(matrix, dtype=complex))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            fh.write(" ".join(f"{z.real:.17g}{z.imag:+.17g}j" for z in row))
            fh.write("\n")


def load_matrix(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        rows, cols = (int(tok) for tok in fh.readline().split())
        data = [complex(tok) for tok in fh.read().split()]
    if len(data) != rows * cols:
        raise ValueError(f"expected {rows * cols} values, found {len(data)}")
    return np.array(data, dtype=complex).reshape(rows, cols)


def dump_realization(realization: ChannelRealization, directory) -> None:
    """Dump taps, frequency response and cluster assignment for cross-checks."""
    import os

    os.makedirs(directory, exist_ok=True)
    dump_matrix(realization.taps, os.path.join(directory, "taps.txt"))
    dump_matrix(realization.freq, os.path.join(directory, "freq.txt"))
    dump_matrix(
        realization.cluster_map.assignment.astype(complex)[None, :],
        os.path.join(directory, "assignment.txt"),
    )
