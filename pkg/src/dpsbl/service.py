"""FastAPI service exposing the simulator and benchmark harness."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import bench
from .simulate import ConfigError, SystemConfig, simulate


class ConfigOverrides(BaseModel):
    """Optional SystemConfig / hyper-prior overrides; unset fields keep defaults."""

    rows: int | None = Field(default=None, ge=1)
    cols: int | None = Field(default=None, ge=1)
    n_total: int | None = Field(default=None, ge=1)
    channel_len: int | None = Field(default=None, ge=1)
    n_nonzero: int | None = Field(default=None, ge=1)
    n_pilots: int | None = Field(default=None, ge=1)
    p: float | None = Field(default=None, ge=0.0, le=1.0)
    snr_db: float | None = None
    max_iters: int | None = Field(default=None, ge=1)
    truncation: int | None = Field(default=None, ge=1)
    seed: int | None = None
    a: float | None = Field(default=None, gt=0)
    b: float | None = Field(default=None, gt=0)
    c: float | None = Field(default=None, gt=0)
    d: float | None = Field(default=None, gt=0)
    e: float | None = Field(default=None, gt=0)
    h_eta: float | None = Field(default=None, gt=0)

    def build(self) -> SystemConfig:
        overrides = {k: v for k, v in self.model_dump().items() if v is not None}
        try:
            cfg = SystemConfig().override(**overrides)
            cfg.validate()
        except ConfigError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        return cfg


class ExperimentRequest(BaseModel):
    family: str
    sweep: list[float] | None = None
    methods: list[str] = Field(default_factory=lambda: list(bench.METHODS))
    n_seeds: int = Field(default=1, ge=1)
    master_seed: int = 0
    damping: float = Field(default=0.7, gt=0.0, le=1.0)
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)


class ExperimentRowModel(BaseModel):
    family: str
    method: str
    sweep_value: float
    seed: int
    mse_db: float | None  # null marks a failed (non-finite) run
    wall_time_ms: float
    iterations: int


class ExperimentResponse(BaseModel):
    rows: list[ExperimentRowModel]
    n_failed: int


class SimulateRequest(BaseModel):
    config: ConfigOverrides = Field(default_factory=ConfigOverrides)
    seed: int | None = None


class SimulateResponse(BaseModel):
    n_clusters: int
    assignment: list[int]
    supports: list[list[int]]
    pilot_indices: list[int]
    true_lambda: float | None


app = FastAPI(title="dpsbl benchmark service", version="0.1.0")


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok"}


@app.get("/families")
def families() -> dict:
    return {name: {"parameter": param, "default_sweep": sweep} for name, (param, sweep) in bench.FAMILIES.items()}


@app.post("/experiments/run", response_model=ExperimentResponse)
def run_experiment(request: ExperimentRequest) -> ExperimentResponse:
    config = request.config.build()
    sweep = request.sweep
    if sweep is None:
        if request.family not in bench.FAMILIES:
            raise HTTPException(status_code=400, detail=f"unknown family {request.family!r}")
        sweep = list(bench.FAMILIES[request.family][1])
    spec = bench.ExperimentSpec(
        family=request.family,
        sweep=sweep,
        fixed=config,
        methods=request.methods,
        n_seeds=request.n_seeds,
        master_seed=request.master_seed,
        damping=request.damping,
    )
    try:
        spec.validate()
    except ConfigError as exc:
        raise HTTPException(status_code=400, detail=str(exc)) from exc
    report = bench.run_experiment(spec)
    rows = [
        ExperimentRowModel(
            family=r.family,
            method=r.method,
            sweep_value=r.sweep_value,
            seed=r.seed,
            mse_db=None if r.mse_db != r.mse_db else r.mse_db,
            wall_time_ms=r.wall_time_ms,
            iterations=r.iterations,
        )
        for r in report.rows
    ]
    return ExperimentResponse(rows=rows, n_failed=report.n_failed)


@app.post("/simulate", response_model=SimulateResponse)
def run_simulate(request: SimulateRequest) -> SimulateResponse:
    config = request.config.build()
    entropy = request.seed if request.seed is not None else config.seed
    cmap, realization, observation = simulate(config, entropy=entropy)
    lam = observation.true_lambda
    return SimulateResponse(
        n_clusters=cmap.n_clusters,
        assignment=cmap.assignment.tolist(),
        supports=[s.tolist() for s in realization.supports],
        pilot_indices=observation.pilot_indices.tolist(),
        true_lambda=None if lam == float("inf") else lam,
    )
