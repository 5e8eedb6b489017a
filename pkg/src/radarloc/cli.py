"""Command-line front end: a thin HTTP client of the radarloc service.

Every subcommand is one request. By default the request runs against an
in-process instance of the service app; pass --server to target a running
radarloc-service instead. stdout carries machine-readable JSON only;
diagnostics go to stderr.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import sys
from typing import Optional

import httpx
import pydantic

from .bench import METHOD_FLAGS
from .service.schemas import RunConfig

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


def _call(server: Optional[str], method: str, path: str, payload: Optional[dict] = None) -> httpx.Response:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            return client.request(method, path, json=payload)

    from .service.app import create_app

    async def go() -> httpx.Response:
        transport = httpx.ASGITransport(app=create_app())
        async with httpx.AsyncClient(
            transport=transport, base_url="http://radarloc.internal", timeout=None
        ) as client:
            return await client.request(method, path, json=payload)

    return asyncio.run(go())


def _emit(response: httpx.Response) -> int:
    if response.status_code == 200:
        print(json.dumps(response.json(), indent=2, sort_keys=True))
        return EXIT_OK
    try:
        detail = response.json().get("detail", response.text)
    except ValueError:
        detail = response.text
    print(f"error ({response.status_code}): {detail}", file=sys.stderr)
    return EXIT_USAGE if response.status_code == 422 else EXIT_RUNTIME


def _load_config(path: str) -> RunConfig:
    """Parse and validate a run configuration, or exit with code 2."""
    try:
        with open(path) as fh:
            raw = fh.read()
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        print(
            f"config parse error in {path} at line {exc.lineno}, column {exc.colno}: {exc.msg}",
            file=sys.stderr,
        )
        raise SystemExit(EXIT_USAGE)
    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        print(f"invalid config {path}:\n{exc}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _solver_overrides(config: RunConfig) -> dict:
    return {
        "solver": config.solver.model_dump(),
        "descriptor": config.descriptor.model_dump(),
        "ransac": config.ransac.model_dump(),
    }


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    payload = {"config": config.model_dump(), "out_dir": args.out, "seed": args.seed}
    return _emit(_call(args.server, "POST", "/simulate", payload))


def cmd_localize(args) -> int:
    payload = {
        "dataset_dir": args.dataset,
        "pair_index": args.pair,
        "method": args.method,
        "no_compensation": args.no_compensation,
        "no_uncertainty": args.no_uncertainty,
        "seed": args.seed if args.seed is not None else 0,
    }
    return _emit(_call(args.server, "POST", "/localize", payload))


def cmd_bench(args, ablate: bool = False) -> int:
    config = _load_config(args.config)
    try:
        config.validate_methods()
    except ValueError as exc:
        print(f"invalid config {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    payload = {
        "dataset_dir": args.dataset,
        "out_dir": args.out,
        "seed": args.seed if args.seed is not None else config.seed,
        "inlier_threshold": config.bench.inlier_threshold,
        "bin_width": config.bench.bin_width,
        "jobs": args.jobs,
        "record_runtime": config.bench.record_runtime,
        **_solver_overrides(config),
    }
    if not ablate:
        payload["methods"] = config.methods
    return _emit(_call(args.server, "POST", "/ablate" if ablate else "/bench", payload))


def cmd_version(args) -> int:
    return _emit(_call(args.server, "GET", "/version"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarloc",
        description="Doppler-compensated radar metric localization toolkit",
    )
    parser.add_argument(
        "--server",
        default=None,
        help="URL of a running radarloc-service; default runs the service in-process",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    sim.add_argument("--config", required=True, help="run configuration JSON")
    sim.add_argument("--out", required=True, help="dataset output directory")
    sim.add_argument("--seed", type=int, default=None, help="override config seed")
    sim.set_defaults(func=cmd_simulate)

    loc = sub.add_parser("localize", help="register one loop pair")
    loc.add_argument("--dataset", required=True, help="dataset directory")
    loc.add_argument("--pair", type=int, default=0, help="pair index in the manifest")
    loc.add_argument("--method", default="mle", choices=sorted(METHOD_FLAGS))
    loc.add_argument("--no-compensation", action="store_true",
                     help="disable Doppler compensation (mle variants only)")
    loc.add_argument("--no-uncertainty", action="store_true",
                     help="disable uncertainty weighting (mle variants only)")
    loc.add_argument("--seed", type=int, default=None)
    loc.set_defaults(func=cmd_localize)

    ben = sub.add_parser("bench", help="run the benchmark over all pairs")
    ben.add_argument("--dataset", required=True)
    ben.add_argument("--config", required=True)
    ben.add_argument("--out", required=True, help="report output directory")
    ben.add_argument("--seed", type=int, default=None, help="override config seed")
    ben.add_argument("--jobs", type=int, default=1, help="worker parallelism cap")
    ben.set_defaults(func=cmd_bench)

    abl = sub.add_parser("ablate", help="run the component-switch ablation grid")
    abl.add_argument("--dataset", required=True)
    abl.add_argument("--config", required=True)
    abl.add_argument("--out", required=True)
    abl.add_argument("--seed", type=int, default=None)
    abl.add_argument("--jobs", type=int, default=1)
    abl.set_defaults(func=lambda a: cmd_bench(a, ablate=True))

    ver = sub.add_parser("version", help="print service name and version")
    ver.set_defaults(func=cmd_version)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    except httpx.HTTPError as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
