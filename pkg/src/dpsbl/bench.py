"""Monte-Carlo benchmark harness: scenario generation, method runs, CSV output."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines, estimator
from .simulate import ChannelRealization, ConfigError, SystemConfig, simulate

MSE_FLOOR_DB = -200.0

METHODS = ("DirichletMP", "Separate", "GivenCluster", "ScsArray")

# family -> (swept config field, default sweep)
FAMILIES = {
    "mse_vs_pilots": ("n_pilots", [24, 28, 32, 36, 40]),
    "mse_vs_snr": ("snr_db", [0.0, 5.0, 10.0, 15.0, 20.0]),
    "mse_vs_iter": ("max_iters", list(range(1, 21))),
    "mse_vs_p": ("p", [0.5, 0.6, 0.7, 0.8, 0.9, 1.0]),
}

CSV_HEADER = "family,method,sweep_value,seed,mse_db,wall_time_ms,iterations"


@dataclass
class ExperimentSpec:
    family: str
    sweep: list
    fixed: SystemConfig
    methods: list = field(default_factory=lambda: list(METHODS))
    n_seeds: int = 1
    master_seed: int = 0
    damping: float = 0.7

    def validate(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown experiment family {self.family!r}")
        if not self.sweep:
            raise ConfigError("sweep must be nonempty")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError(f"unknown method {m!r}")
        if self.family == "mse_vs_iter" and any(int(v) != v or v < 1 for v in self.sweep):
            raise ConfigError("iteration sweep values must be positive integers")
        self.fixed.validate()


@dataclass
class ExperimentRow:
    family: str
    method: str
    sweep_value: float
    seed: int
    mse_db: float  # NaN marks a failed run
    wall_time_ms: float
    iterations: int


@dataclass
class ExperimentReport:
    rows: list

    @property
    def n_failed(self) -> int:
        return sum(1 for r in self.rows if math.isnan(r.mse_db))


def mse_db_taps(alpha_hat: np.ndarray, alpha_true: np.ndarray) -> float:
    den = float(np.sum(np.abs(alpha_true) ** 2))
    if den == 0.0:
        raise ValueError("true channel has zero energy")
    num = float(np.sum(np.abs(alpha_hat - alpha_true) ** 2))
    if num == 0.0:
        return MSE_FLOOR_DB
    return max(10.0 * math.log10(num / den), MSE_FLOOR_DB)


def compute_mse(estimate: estimator.EstimateReport, truth: ChannelRealization) -> float:
    """Normalized tap-domain MSE in dB, floored at -200 dB."""
    return mse_db_taps(estimate.alpha_hat, truth.taps)


def _run_method(method, config, observation, cmap, damping, record_trajectory=False):
    kwargs = {"damping": damping, "record_trajectory": record_trajectory}
    if method == "DirichletMP":
        return estimator.run(config, observation, **kwargs)
    if method == "Separate":
        return baselines.run_separate(config, observation, **kwargs)
    if method == "GivenCluster":
        return baselines.run_given_cluster(config, observation, cmap, **kwargs)
    if method == "ScsArray":
        return baselines.run_scs_array(config, observation, **kwargs)
    raise ConfigError(f"unknown method {method!r}")


def run_experiment(spec: ExperimentSpec) -> ExperimentReport:
    """Run every requested method on identical per-seed observations.

    Per-cell RNG streams derive from the master seed through the entropy
    tuple (master_seed, sweep_index, seed); the iteration family shares one
    scenario per seed across the whole sweep.
    """
    spec.validate()
    if spec.family == "mse_vs_iter":
        return _run_iteration_family(spec)
    param, _ = FAMILIES[spec.family]
    rows = []
    for si, sv in enumerate(spec.sweep):
        value = int(sv) if param in ("n_pilots",) else float(sv)
        config = spec.fixed.override(**{param: value})
        for seed in range(spec.n_seeds):
            cmap, truth, observation = simulate(config, entropy=[spec.master_seed, si, seed])
            for method in spec.methods:
                t0 = time.perf_counter()
                try:
                    report = _run_method(method, config, observation, cmap, spec.damping)
                    mse = compute_mse(report, truth)
                    iters = report.iterations_run
                except estimator.EstimatorDivergenceError:
                    mse = float("nan")
                    iters = config.max_iters
                wall_ms = (time.perf_counter() - t0) * 1e3
                rows.append(
                    ExperimentRow(spec.family, method, float(sv), seed, mse, wall_ms, iters)
                )
    return ExperimentReport(rows=rows)


def _run_iteration_family(spec: ExperimentSpec) -> ExperimentReport:
    max_iter = int(max(spec.sweep))
    config = spec.fixed.override(max_iters=max_iter)
    rows = []
    for seed in range(spec.n_seeds):
        cmap, truth, observation = simulate(config, entropy=[spec.master_seed, 0, seed])
        for method in spec.methods:
            t0 = time.perf_counter()
            try:
                report = _run_method(
                    method, config, observation, cmap, spec.damping, record_trajectory=True
                )
                per_iter = {
                    int(v): mse_db_taps(report.trajectory[int(v) - 1], truth.taps)
                    for v in spec.sweep
                }
            except estimator.EstimatorDivergenceError:
                per_iter = {int(v): float("nan") for v in spec.sweep}
            wall_ms = (time.perf_counter() - t0) * 1e3
            for v in spec.sweep:
                rows.append(
                    ExperimentRow(
                        spec.family, method, float(v), seed, per_iter[int(v)], wall_ms, int(v)
                    )
                )
    return ExperimentReport(rows=rows)


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def emit_csv(report: ExperimentReport, path, timing: bool = True) -> None:
    """Write the report sorted by (family, method, sweep_value, seed).

    With ``timing=False`` the wall-time column is zeroed so repeated runs are
    byte-identical. A trailing comment line counts failed rows, if any.
    """
    if not report.rows:
        raise ValueError("refusing to write an empty report")
    rows = sorted(report.rows, key=lambda r: (r.family, r.method, r.sweep_value, r.seed))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            wall = r.wall_time_ms if timing else 0.0
            fh.write(
                f"{r.family},{r.method},{_fmt(r.sweep_value)},{r.seed},"
                f"{_fmt(r.mse_db)},{_fmt(wall)},{r.iterations}\n"
            )
        failed = report.n_failed
        if failed:
            fh.write(f"# failed_rows={failed}\n")


def load_csv(path) -> ExperimentReport:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected CSV header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            family, method, sv, seed, mse, wall, iters = line.split(",")
            rows.append(
                ExperimentRow(
                    family, method, float(sv), int(seed), float(mse), float(wall), int(iters)
                )
            )
    return ExperimentReport(rows=rows)
