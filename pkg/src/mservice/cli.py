"""Command-line entry point.

    mservice serve    --config service.toml
    mservice seed     fixtures/demo.json [--config ...]
    mservice simulate fixtures/figure9.script.json --seed 42 [--fixture ...]
    mservice report   [--from ...] [--to ...] [--out-dir reports/]

Exit codes: 0 success, 1 expectation or validation failure,
2 configuration or environment failure.
"""

from __future__ import annotations

import argparse
import errno
import json
import sys
from datetime import datetime
from pathlib import Path

from .config import Config, load_config
from .errors import ConfigInvalid, FixtureInvalid, MServiceError, PortInUse
from .fixtures import apply_fixture, load_fixture
from .scenario import load_script, run_script
from .service import ServiceContext

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_ENVIRONMENT = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mservice",
                                     description="sponsored SMS/USSD health service")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the combined HTTP service")
    serve.add_argument("--config", help="path to TOML or JSON config")

    seed = sub.add_parser("seed", help="load a seed fixture (idempotent)")
    seed.add_argument("fixture", help="fixture JSON file")
    seed.add_argument("--config", help="path to TOML or JSON config")

    simulate = sub.add_parser("simulate", help="run a scripted session scenario")
    simulate.add_argument("script", help="scenario JSON file")
    simulate.add_argument("--seed", type=int, default=0,
                          help="rng seed for reproducible runs")
    simulate.add_argument("--fixture",
                          help="seed a fresh in-memory store from this fixture")
    simulate.add_argument("--config", help="path to TOML or JSON config")
    simulate.add_argument("--url",
                          help="drive a running service instead of embedding one")

    report = sub.add_parser("report", help="print and export cost reports")
    report.add_argument("--from", dest="since", help="ISO timestamp or epoch")
    report.add_argument("--to", dest="until", help="ISO timestamp or epoch")
    report.add_argument("--out-dir", help="write CSVs and figures here")
    report.add_argument("--config", help="path to TOML or JSON config")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _serve(args)
        if args.command == "seed":
            return _seed(args)
        if args.command == "simulate":
            return _simulate(args)
        if args.command == "report":
            return _report(args)
    except (ConfigInvalid, PortInUse) as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except MServiceError as exc:
        print(f"error: {exc.code}: {exc.detail}", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _load(args) -> Config:
    return load_config(args.config)


def _check_storage(config: Config) -> None:
    path = config.storage.path
    if path == ":memory:":
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir():
        raise ConfigInvalid(f"storage.path: directory {parent} does not exist")


def _check_port(config: Config) -> None:
    import socket

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((config.server.host, config.server.port))
    except OSError as exc:
        if exc.errno == errno.EADDRINUSE:
            raise PortInUse(f"port {config.server.port} is already in use") from exc
        raise
    finally:
        probe.close()


def build_server(config: Config):
    """Assemble the service context and a ready-to-run uvicorn server."""
    import uvicorn

    from .httpapi import create_app

    _check_storage(config)
    _check_port(config)
    ctx = ServiceContext(config)
    static = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    app = create_app(ctx, static_dir=static if static.is_dir() else None)
    server = uvicorn.Server(uvicorn.Config(app, host=config.server.host,
                                           port=config.server.port,
                                           log_level="info"))
    return ctx, server


def _serve(args) -> int:
    config = _load(args)
    ctx, server = build_server(config)
    try:
        server.run()
    finally:
        ctx.close()
    return EXIT_OK


def _seed(args) -> int:
    config = _load(args)
    _check_storage(config)
    data = load_fixture(args.fixture)
    ctx = ServiceContext(config)
    try:
        counts = apply_fixture(ctx, data)
    finally:
        ctx.close()
    for section, count in counts.items():
        print(f"{section}: {count} created")
    return EXIT_OK


def _simulate(args) -> int:
    config = _load(args)
    steps = load_script(args.script)
    if args.url:
        import httpx

        with httpx.Client(base_url=args.url, timeout=30.0) as client:
            transcript, ok = run_script(client, config, steps)
    else:
        transcript, ok = _embedded_run(config, steps, args)
    sys.stdout.write(transcript)
    return EXIT_OK if ok else EXIT_FAILURE


def _embedded_run(config: Config, steps, args) -> tuple[str, bool]:
    from fastapi.testclient import TestClient

    from .httpapi import create_app

    if args.fixture:
        config.storage.path = ":memory:"
    else:
        _check_storage(config)
    ctx = ServiceContext(config, rng_seed=args.seed)
    try:
        if args.fixture:
            apply_fixture(ctx, load_fixture(args.fixture))
        with TestClient(create_app(ctx)) as client:
            return run_script(client, config, steps)
    finally:
        ctx.close()


def _report(args) -> int:
    config = _load(args)
    _check_storage(config)
    since, until = _parse_ts(args.since), _parse_ts(args.until)
    ctx = ServiceContext(config)
    try:
        costs = ctx.outbox.cost_report(since, until)
        impressions = ctx.ledger.impression_report(since, until)
        print(json.dumps({"sms": costs, "sponsors": impressions}, indent=2))
        if args.out_dir:
            from .reporting import write_reports

            summary = write_reports(ctx, args.out_dir, since, until)
            for name in summary["files"]:
                print(f"wrote {name}")
    finally:
        ctx.close()
    return EXIT_OK


def _parse_ts(raw: str | None) -> float | None:
    if raw is None:
        return None
    try:
        return float(raw)
    except ValueError:
        try:
            return datetime.fromisoformat(raw).timestamp()
        except ValueError as exc:
            raise ConfigInvalid(f"cannot parse timestamp {raw!r}") from exc


if __name__ == "__main__":
    sys.exit(main())
