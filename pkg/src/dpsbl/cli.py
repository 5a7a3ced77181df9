"""`bench` CLI: a thin HTTP client over the benchmark service.

Without --server the service app is mounted in-process through a sync ASGI
test client, so no network or separate process is needed.
"""

from __future__ import annotations

import sys

import click
import httpx

from . import bench

EXIT_CONFIG = 2
EXIT_IO = 3

CONFIG_KEYS = {
    "rows": int, "cols": int, "n_total": int, "channel_len": int, "n_nonzero": int,
    "n_pilots": int, "p": float, "snr_db": float, "max_iters": int, "truncation": int,
    "seed": int, "a": float, "b": float, "c": float, "d": float, "e": float, "h_eta": float,
}


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service import app

    return TestClient(app, raise_server_exceptions=False)


def _parse_config_file(path: str) -> dict:
    overrides = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    click.echo(f"config error: {path}:{lineno}: expected 'key = value'", err=True)
                    sys.exit(EXIT_CONFIG)
                key, value = (tok.strip() for tok in line.split("=", 1))
                if key not in CONFIG_KEYS:
                    click.echo(f"config error: {path}:{lineno}: unknown key {key!r}", err=True)
                    sys.exit(EXIT_CONFIG)
                try:
                    overrides[key] = CONFIG_KEYS[key](value)
                except ValueError:
                    click.echo(f"config error: {path}:{lineno}: bad value for {key!r}", err=True)
                    sys.exit(EXIT_CONFIG)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    return overrides


@click.group()
def main():
    """Benchmark harness for DP-SBL massive MIMO channel estimation."""


@main.command("list")
@click.option("--server", default=None, help="Remote service URL; default runs in-process.")
def list_families(server):
    """Print the available experiment families."""
    with _client(server) as client:
        resp = client.get("/families")
        resp.raise_for_status()
        for name, info in resp.json().items():
            click.echo(f"{name}  (sweeps {info['parameter']}, default {info['default_sweep']})")


@main.command("run")
@click.option("--experiment", required=True, help="Experiment family (see `bench list`).")
@click.option("--config", "config_path", default=None, type=click.Path(), help="key = value config file.")
@click.option("--seeds", default=1, type=int, help="Monte-Carlo seeds per sweep point.")
@click.option("--master-seed", default=0, type=int)
@click.option("--methods", default=",".join(bench.METHODS), help="Comma-separated method list.")
@click.option("--out", required=True, type=click.Path(), help="Output CSV path.")
@click.option("--sweep", default=None, help="Comma-separated sweep values (default per family).")
@click.option("--iters", default=None, type=int, help="Override iteration count T.")
@click.option("--snr-db", default=None, type=float)
@click.option("--pilots", default=None, type=int)
@click.option("--p", default=None, type=float)
@click.option("--damping", default=0.7, type=float)
@click.option("--timing/--no-timing", default=False,
              help="Write measured wall times (breaks byte-determinism across runs).")
@click.option("--server", default=None, help="Remote service URL; default runs in-process.")
def run(experiment, config_path, seeds, master_seed, methods, out, sweep, iters,
        snr_db, pilots, p, damping, timing, server):
    """Run one experiment family and write a CSV report."""
    overrides = _parse_config_file(config_path) if config_path else {}
    if iters is not None:
        overrides["max_iters"] = iters
    if snr_db is not None:
        overrides["snr_db"] = snr_db
    if pilots is not None:
        overrides["n_pilots"] = pilots
    if p is not None:
        overrides["p"] = p

    payload = {
        "family": experiment,
        "methods": [m.strip() for m in methods.split(",") if m.strip()],
        "n_seeds": seeds,
        "master_seed": master_seed,
        "damping": damping,
        "config": overrides,
    }
    if sweep is not None:
        try:
            payload["sweep"] = [float(tok) for tok in sweep.split(",") if tok.strip()]
        except ValueError:
            click.echo("config error: --sweep must be comma-separated numbers", err=True)
            sys.exit(EXIT_CONFIG)

    with _client(server) as client:
        resp = client.post("/experiments/run", json=payload)
        if resp.status_code in (400, 422):
            click.echo(f"config error: {resp.json().get('detail')}", err=True)
            sys.exit(EXIT_CONFIG)
        resp.raise_for_status()
        body = resp.json()

    rows = [
        bench.ExperimentRow(
            family=r["family"],
            method=r["method"],
            sweep_value=r["sweep_value"],
            seed=r["seed"],
            mse_db=float("nan") if r["mse_db"] is None else r["mse_db"],
            wall_time_ms=r["wall_time_ms"],
            iterations=r["iterations"],
        )
        for r in body["rows"]
    ]
    try:
        bench.emit_csv(bench.ExperimentReport(rows=rows), out, timing=timing)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(EXIT_IO)
    click.echo(f"wrote {len(rows)} rows to {out}" + (f" ({body['n_failed']} failed)" if body["n_failed"] else ""))


@main.command("serve")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8000, type=int)
def serve(host, port):
    """Start the benchmark service over HTTP."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
