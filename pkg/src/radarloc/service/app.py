"""HTTP service exposing simulation, localization, and benchmarking.

The CLI is a thin client of this app; everything it can do goes through
these endpoints. Paths in request bodies are resolved on the service host,
which is expected to share a filesystem with the data it serves.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..bench import Dataset, MethodConfig, localize_pair, run_ablation, run_benchmark
from ..errors import RadarLocError
from ..simulator import generate_dataset, generate_scene
from .schemas import (
    AblateRequest,
    AblateResponse,
    BenchRequest,
    BenchResponse,
    LocalizeRequest,
    RegistrationModel,
    SimulateRequest,
    SimulateResponse,
    VersionResponse,
)


def _resolve_method(name: str, no_compensation: bool, no_uncertainty: bool) -> MethodConfig:
    if name.startswith("mle"):
        base = MethodConfig.from_name(name)
        dc = base.doppler_compensation and not no_compensation
        ue = base.uncertainty_weighting and not no_uncertainty
        variants = {
            (True, True): "mle",
            (False, True): "mle_no_dc",
            (True, False): "mle_no_ue",
            (False, False): "mle_neither",
        }
        return MethodConfig.from_name(variants[(dc, ue)])
    if no_compensation or no_uncertainty:
        raise ValueError(f"component flags only apply to mle variants, not {name!r}")
    return MethodConfig.from_name(name)


def _manifest_path(dataset_dir: str) -> Path:
    path = Path(dataset_dir)
    manifest = path if path.name == "manifest.json" else path / "manifest.json"
    if not manifest.is_file():
        raise HTTPException(status_code=404, detail=f"manifest not found: {manifest}")
    return manifest


def create_app() -> FastAPI:
    app = FastAPI(title="radarloc", version=__version__)

    @app.exception_handler(RadarLocError)
    async def domain_error(_, exc: RadarLocError):
        raise HTTPException(status_code=400, detail=str(exc))

    @app.get("/version", response_model=VersionResponse)
    def version() -> VersionResponse:
        return VersionResponse(name="radarloc", version=__version__)

    @app.post("/simulate", response_model=SimulateResponse)
    def simulate(req: SimulateRequest) -> SimulateResponse:
        cfg = req.config
        seed = cfg.seed if req.seed is None else req.seed
        try:
            scene = generate_scene(cfg.scene.landmark_count, cfg.scene.extent, seed)
            manifest = generate_dataset(
                scene=scene,
                routes=[r.to_spec() for r in cfg.routes],
                spec=cfg.sensor.to_spec(),
                noise=cfg.noise.to_spec(seed + 1),
                doppler_on=cfg.doppler_on,
                out_dir=req.out_dir,
                submap_scans=cfg.submap_scans,
                loop_max_dist=cfg.loop_max_dist,
                max_pairs=cfg.max_pairs,
            )
        except (RadarLocError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except OSError as exc:
            raise HTTPException(status_code=500, detail=f"io error: {exc}")
        return SimulateResponse(
            manifest_path=str(Path(req.out_dir) / "manifest.json"),
            route_count=len(manifest["routes"]),
            pair_count=len(manifest["pairs"]),
        )

    @app.post("/localize", response_model=RegistrationModel)
    def localize(req: LocalizeRequest) -> RegistrationModel:
        manifest = _manifest_path(req.dataset_dir)
        try:
            mconf = _resolve_method(req.method, req.no_compensation, req.no_uncertainty)
            dataset = Dataset(manifest)
            if not (0 <= req.pair_index < len(dataset.pairs)):
                raise HTTPException(
                    status_code=400,
                    detail=f"pair_index {req.pair_index} out of range ({len(dataset.pairs)} pairs)",
                )
            result = localize_pair(
                dataset,
                req.pair_index,
                mconf,
                solver=req.solver.to_spec(),
                descriptor_config=req.descriptor.to_spec(),
                ransac_config=req.ransac.to_spec(),
                seed=req.seed,
            )
        except (RadarLocError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return RegistrationModel.from_result(result)

    @app.post("/bench", response_model=BenchResponse)
    def bench(req: BenchRequest) -> BenchResponse:
        manifest = _manifest_path(req.dataset_dir)
        try:
            methods = [MethodConfig.from_name(m) for m in req.methods]
            report = run_benchmark(
                manifest,
                methods,
                seed=req.seed,
                out_dir=req.out_dir,
                inlier_threshold=req.inlier_threshold,
                bin_width=req.bin_width,
                solver=req.solver.to_spec(),
                descriptor_config=req.descriptor.to_spec(),
                ransac_config=req.ransac.to_spec(),
                jobs=req.jobs,
                record_runtime=req.record_runtime,
            )
        except (RadarLocError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except OSError as exc:
            raise HTTPException(status_code=500, detail=f"io error: {exc}")
        return BenchResponse(
            pair_csv=report["pair_csv"],
            summary_csv=report["summary_csv"],
            pair_count=report["pair_count"],
            summary=report["summary"],
        )

    @app.post("/ablate", response_model=AblateResponse)
    def ablate(req: AblateRequest) -> AblateResponse:
        manifest = _manifest_path(req.dataset_dir)
        try:
            report = run_ablation(
                manifest,
                seed=req.seed,
                out_dir=req.out_dir,
                inlier_threshold=req.inlier_threshold,
                bin_width=req.bin_width,
                solver=req.solver.to_spec(),
                descriptor_config=req.descriptor.to_spec(),
                ransac_config=req.ransac.to_spec(),
                jobs=req.jobs,
                record_runtime=req.record_runtime,
            )
        except (RadarLocError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except OSError as exc:
            raise HTTPException(status_code=500, detail=f"io error: {exc}")
        return AblateResponse(
            pair_csv=report["pair_csv"],
            summary_csv=report["summary_csv"],
            pair_count=report["pair_count"],
            summary=report["summary"],
            ablation_csv=report["ablation_csv"],
            ablation=report["ablation"],
        )

    return app


def main() -> None:
    """Run the service under uvicorn (radarloc-service entry point)."""
    import argparse

    import uvicorn

    parser = argparse.ArgumentParser(prog="radarloc-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args()
    uvicorn.run(create_app(), host=args.host, port=args.port)


if __name__ == "__main__":
    main()
