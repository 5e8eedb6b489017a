"""Request/response models and the run-configuration schema.

RunConfig is the single JSON file that reproduces a whole run: sensor,
noise, routes, methods, solver settings, and one master seed. Unknown keys
are rejected everywhere, and no seed ever defaults to wall-clock entropy:
sub-seeds derive from the master seed (scene = seed, noise = seed + 1,
benchmark = seed + 2) unless overridden explicitly.

Angles in the JSON layer are degrees (suffix _deg) and are converted to
radians exactly once, in the to_* helpers.
"""

from __future__ import annotations

import math
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..association import RansacConfig
from ..bench import METHOD_FLAGS
from ..doppler import RadarParams
from ..registration import RegistrationResult, SolverConfig
from ..simulator import NoiseSpec, RouteSpec, SensorSpec
from ..submap import DescriptorConfig


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class SceneConfig(StrictModel):
    landmark_count: int = Field(300, ge=1)
    extent: float = Field(200.0, gt=0)


class SensorConfig(StrictModel):
    beta: float = Field(0.04, gt=0)
    max_range: float = Field(100.0, gt=0)
    fov_deg: float = Field(150.0, gt=0, le=360.0)
    scan_rate: float = Field(13.0, gt=0)

    def to_spec(self) -> SensorSpec:
        return SensorSpec(
            max_range=self.max_range,
            fov=math.radians(self.fov_deg),
            params=RadarParams(beta=self.beta),
            scan_rate=self.scan_rate,
        )


class NoiseConfig(StrictModel):
    family: Literal["gaussian", "gamma", "student_t"] = "gaussian"
    range_param: float = Field(0.25, ge=0)
    angle_param_deg: float = Field(0.5, ge=0)
    velocity_param: float = Field(0.1, ge=0)
    dof: float = Field(100.0, gt=2)
    gamma_shape: float = Field(1.0, gt=0)
    outlier_rate: float = Field(0.0, ge=0, lt=1)

    def to_spec(self, seed: int) -> NoiseSpec:
        return NoiseSpec(
            family=self.family,
            range_param=self.range_param,
            angle_param=math.radians(self.angle_param_deg),
            velocity_param=self.velocity_param,
            dof=self.dof,
            seed=seed,
            gamma_shape=self.gamma_shape,
            outlier_rate=self.outlier_rate,
        )


class RouteConfig(StrictModel):
    id: str = ""
    waypoints: list[tuple[float, float]] = Field(min_length=2)
    speed_mps: float = Field(gt=0)

    def to_spec(self) -> RouteSpec:
        return RouteSpec(
            waypoints=tuple((float(x), float(y)) for x, y in self.waypoints),
            speed=self.speed_mps,
            route_id=self.id,
        )


class SolverSettings(StrictModel):
    max_iterations: int = Field(50, ge=1)
    param_tolerance: float = Field(1e-8, gt=0)
    cost_tolerance: float = Field(1e-10, gt=0)
    initial_damping: float = Field(1e-3, gt=0)
    cauchy_scale: float = Field(2.0, gt=0)
    refresh_weights: bool = True

    def to_spec(self) -> SolverConfig:
        return SolverConfig(**self.model_dump())


class DescriptorSettings(StrictModel):
    ring_count: int = Field(16, ge=2)
    ring_width: float = Field(2.5, gt=0)

    def to_spec(self) -> DescriptorConfig:
        return DescriptorConfig(**self.model_dump())


class RansacSettings(StrictModel):
    iterations: int = Field(500, ge=1)
    inlier_threshold: float = Field(1.0, gt=0)
    min_inliers: int = Field(5, ge=2)

    def to_spec(self, seed: int = 0) -> RansacConfig:
        return RansacConfig(seed=seed, **self.model_dump())


class BenchSettings(StrictModel):
    inlier_threshold: float = Field(2.0, gt=0)
    bin_width: float = Field(1.0, gt=0)
    record_runtime: bool = False


class RunConfig(StrictModel):
    """Top-level reproducible run description."""

    seed: int = Field(ge=0)
    scene: SceneConfig = SceneConfig()
    sensor: SensorConfig = SensorConfig()
    noise: NoiseConfig = NoiseConfig()
    routes: list[RouteConfig] = Field(min_length=2)
    doppler_on: bool = True
    submap_scans: int = Field(10, ge=1)
    loop_max_dist: float = Field(2.0, gt=0)
    max_pairs: Optional[int] = Field(None, ge=1)
    methods: list[str] = ["mle"]
    solver: SolverSettings = SolverSettings()
    descriptor: DescriptorSettings = DescriptorSettings()
    ransac: RansacSettings = RansacSettings()
    bench: BenchSettings = BenchSettings()

    def validate_methods(self) -> list[str]:
        for name in self.methods:
            if name not in METHOD_FLAGS:
                raise ValueError(f"unknown method {name!r}")
        return self.methods


# --- request / response bodies ---

class VersionResponse(StrictModel):
    name: str
    version: str


class SimulateRequest(StrictModel):
    config: RunConfig
    out_dir: str
    seed: Optional[int] = None  # overrides config.seed


class SimulateResponse(StrictModel):
    manifest_path: str
    route_count: int
    pair_count: int


class PoseModel(StrictModel):
    theta: float
    x: float
    y: float


class RegistrationModel(StrictModel):
    theta: float
    t: tuple[float, float]
    iters: int
    cost: float
    converged: bool
    inliers: int

    @classmethod
    def from_result(cls, result: RegistrationResult) -> "RegistrationModel":
        data = result.to_json()
        return cls(
            theta=data["theta"],
            t=tuple(data["t"]),
            iters=data["iters"],
            cost=data["cost"],
            converged=data["converged"],
            inliers=data["inliers"],
        )


class LocalizeRequest(StrictModel):
    dataset_dir: str
    pair_index: int = Field(0, ge=0)
    method: str = "mle"
    no_compensation: bool = False
    no_uncertainty: bool = False
    seed: int = 0
    solver: SolverSettings = SolverSettings()
    descriptor: DescriptorSettings = DescriptorSettings()
    ransac: RansacSettings = RansacSettings()


class BenchRequest(StrictModel):
    dataset_dir: str
    out_dir: str
    methods: list[str] = ["mle"]
    seed: int = 0
    inlier_threshold: float = Field(2.0, gt=0)
    bin_width: float = Field(1.0, gt=0)
    jobs: int = Field(1, ge=1)
    record_runtime: bool = False
    solver: SolverSettings = SolverSettings()
    descriptor: DescriptorSettings = DescriptorSettings()
    ransac: RansacSettings = RansacSettings()


class AblateRequest(StrictModel):
    dataset_dir: str
    out_dir: str
    seed: int = 0
    inlier_threshold: float = Field(2.0, gt=0)
    bin_width: float = Field(1.0, gt=0)
    jobs: int = Field(1, ge=1)
    record_runtime: bool = False
    solver: SolverSettings = SolverSettings()
    descriptor: DescriptorSettings = DescriptorSettings()
    ransac: RansacSettings = RansacSettings()


class MethodSummary(StrictModel):
    mean: float
    max: float
    median: float


class BenchResponse(StrictModel):
    pair_csv: str
    summary_csv: str
    pair_count: int
    summary: dict


class AblateResponse(BenchResponse):
    ablation_csv: str
    ablation: list[dict]
