"""Detection-level radar world: scenes, trajectories, noisy scans, datasets.

Everything here is a pure function of configuration and seeds. Each scan
draws from an RNG stream derived from (seed, round index, sample index), so
regeneration is bit-identical regardless of evaluation order.

Noise families: Gaussian N(0, p^2); Student's t scaled as p * t(dof); and a
zero-centered Gamma (Gamma(shape, scale=p) minus its mean), which keeps the
stated scale parameter and right skew while leaving ranges unbiased.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .doppler import RadarDetection, RadarParams, Scan, write_scans_jsonl
from .geometry import Pose, wrap_angle

NOISE_FAMILIES = ("gaussian", "gamma", "student_t")

DEFAULT_MAX_RANGE = 100.0
DEFAULT_FOV = math.radians(150.0)
DEFAULT_BETA = 0.04
DEFAULT_SCAN_RATE = 13.0


@dataclass(frozen=True)
class Scene:
    """Static reflector positions, uniformly placed in a square."""

    landmarks: np.ndarray
    seed: int
    extent: float

    def __post_init__(self):
        pts = np.asarray(self.landmarks, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise ValueError("landmarks must be (N, 2)")
        if np.any(np.abs(pts) > self.extent + 1e-9):
            raise ValueError("landmark outside scene extent")
        object.__setattr__(self, "landmarks", pts)


@dataclass(frozen=True)
class SensorSpec:
    max_range: float = DEFAULT_MAX_RANGE
    fov: float = DEFAULT_FOV
    params: RadarParams = field(default_factory=lambda: RadarParams(beta=DEFAULT_BETA))
    scan_rate: float = DEFAULT_SCAN_RATE

    def __post_init__(self):
        if not (0 < self.fov <= 2 * math.pi):
            raise ValueError("fov must be in (0, 2*pi]")
        if self.max_range <= 0:
            raise ValueError("max_range must be positive")
        if self.scan_rate <= 0:
            raise ValueError("scan_rate must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Additive measurement noise on (range, azimuth, radial velocity).

    ``outlier_rate`` injects that fraction of uniformly random false
    detections per scan on top of the real returns.
    """

    family: str = "gaussian"
    range_param: float = 0.25
    angle_param: float = math.radians(0.5)
    velocity_param: float = 0.1
    dof: float = 100.0
    seed: int = 0
    gamma_shape: float = 1.0
    outlier_rate: float = 0.0

    def __post_init__(self):
        if self.family not in NOISE_FAMILIES:
            raise ValueError(f"unknown noise family {self.family!r}")
        if min(self.range_param, self.angle_param, self.velocity_param) < 0:
            raise ValueError("noise params must be nonnegative")
        if self.family == "student_t" and self.dof <= 2:
            raise ValueError("student_t dof must exceed 2")
        if self.gamma_shape <= 0:
            raise ValueError("gamma_shape must be positive")
        if not (0 <= self.outlier_rate < 1):
            raise ValueError("outlier_rate must be in [0, 1)")

    @classmethod
    def gaussian(cls, seed: int = 0, **kw) -> "NoiseSpec":
        return cls(family="gaussian", seed=seed, **kw)

    @classmethod
    def gamma(cls, seed: int = 0, **kw) -> "NoiseSpec":
        kw.setdefault("range_param", 0.25)
        kw.setdefault("angle_param", math.radians(0.025))
        kw.setdefault("velocity_param", 0.01)
        return cls(family="gamma", seed=seed, **kw)

    @classmethod
    def student_t(cls, seed: int = 0, **kw) -> "NoiseSpec":
        return cls(family="student_t", dof=kw.pop("dof", 100.0), seed=seed, **kw)

    @classmethod
    def silent(cls, seed: int = 0) -> "NoiseSpec":
        return cls(range_param=0.0, angle_param=0.0, velocity_param=0.0, seed=seed)


@dataclass(frozen=True)
class Trajectory:
    """Constant-speed samples along a piecewise-linear route."""

    times: np.ndarray
    poses: tuple[Pose, ...]
    speeds: np.ndarray
    route_id: str = "route"

    def __post_init__(self):
        if len(self.poses) != len(self.times) or len(self.times) != len(self.speeds):
            raise ValueError("times, poses, speeds must align")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if np.any(np.asarray(self.speeds) < 0):
            raise ValueError("speeds must be nonnegative")

    def __len__(self) -> int:
        return len(self.poses)

    @property
    def positions(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.poses])


def generate_scene(landmark_count: int, extent: float, seed: int) -> Scene:
    if landmark_count < 1:
        raise ValueError("landmark_count must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-extent, extent, size=(landmark_count, 2))
    return Scene(landmarks=pts, seed=seed, extent=extent)


def generate_trajectory(
    route: Sequence[Sequence[float]],
    mean_speed: float,
    scan_rate: float = DEFAULT_SCAN_RATE,
    route_id: str = "route",
) -> Trajectory:
    """Sample a piecewise-linear route at constant speed and fixed rate.

    Heading follows the motion direction of the active segment.
    """
    waypoints = np.asarray(route, dtype=float)
    if waypoints.ndim != 2 or waypoints.shape[0] < 2:
        raise ValueError("route needs at least two waypoints")
    if mean_speed <= 0:
        raise ValueError("mean_speed must be positive")
    seg_vecs = np.diff(waypoints, axis=0)
    seg_lens = np.linalg.norm(seg_vecs, axis=1)
    total = float(seg_lens.sum())
    if total <= 0:
        raise ValueError("route has zero length")
    cumulative = np.concatenate([[0.0], np.cumsum(seg_lens)])

    duration = total / mean_speed
    dt = 1.0 / scan_rate
    count = int(math.floor(duration / dt + 1e-9)) + 1
    times = np.arange(count) * dt
    poses = []
    for t in times:
        arc = min(mean_speed * t, total)
        seg = min(int(np.searchsorted(cumulative, arc, side="right")) - 1, len(seg_lens) - 1)
        frac = (arc - cumulative[seg]) / seg_lens[seg] if seg_lens[seg] > 0 else 0.0
        pos = waypoints[seg] + frac * seg_vecs[seg]
        heading = math.atan2(seg_vecs[seg][1], seg_vecs[seg][0])
        poses.append(Pose(theta=heading, x=float(pos[0]), y=float(pos[1])))
    return Trajectory(
        times=times,
        poses=tuple(poses),
        speeds=np.full(count, float(mean_speed)),
        route_id=route_id,
    )


def sample_noise(noise: NoiseSpec, channel: str, rng: np.random.Generator) -> float:
    """One additive noise draw for the given channel."""
    return float(_noise_draws(noise, channel, 1, rng)[0])


def _noise_draws(
    noise: NoiseSpec, channel: str, count: int, rng: np.random.Generator
) -> np.ndarray:
    param = {
        "range": noise.range_param,
        "angle": noise.angle_param,
        "velocity": noise.velocity_param,
    }[channel]
    if param == 0.0 or count == 0:
        return np.zeros(count)
    if noise.family == "gaussian":
        return rng.normal(0.0, param, size=count)
    if noise.family == "student_t":
        return param * rng.standard_t(noise.dof, size=count)
    shape = noise.gamma_shape
    return rng.gamma(shape, scale=param, size=count) - shape * param


def simulate_scan(
    scene: Scene,
    pose: Pose,
    velocity: Sequence[float],
    spec: SensorSpec = SensorSpec(),
    noise: NoiseSpec = NoiseSpec(),
    doppler_on: bool = True,
    rng: Optional[np.random.Generator] = None,
    timestamp: float = 0.0,
) -> Scan:
    """Scan the scene from a body pose moving with the given body-frame
    velocity.

    For each landmark inside range and field of view: the true polar
    coordinates, the radial velocity of the static target (negated
    projection of ego velocity on the line of sight), the Doppler range
    shift when enabled, then additive noise per channel. Detections whose
    noisy range lands below zero are dropped.
    """
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    vel = np.asarray(velocity, dtype=float)
    beta = spec.params.beta

    delta = scene.landmarks - np.array([pose.x, pose.y])
    local = delta @ pose.rotation_matrix()  # world -> body: R^T via right-multiply
    ranges = np.linalg.norm(local, axis=1)
    azimuths = np.arctan2(local[:, 1], local[:, 0])
    visible = (ranges <= spec.max_range) & (np.abs(azimuths) <= spec.fov / 2.0) & (ranges > 1e-9)

    r = ranges[visible]
    phi = azimuths[visible]
    los = local[visible] / r[:, None]
    radial_v = -(los @ vel)
    if doppler_on:
        r = r + beta * radial_v

    r_noisy = r + _noise_draws(noise, "range", r.size, rng)
    phi_noisy = phi + _noise_draws(noise, "angle", r.size, rng)
    v_noisy = radial_v + _noise_draws(noise, "velocity", r.size, rng)

    if noise.outlier_rate > 0:
        extra = int(round(noise.outlier_rate * r.size))
        if extra:
            r_fake = rng.uniform(1.0, spec.max_range, size=extra)
            phi_fake = rng.uniform(-spec.fov / 2.0, spec.fov / 2.0, size=extra)
            v_fake = rng.uniform(-25.0, 25.0, size=extra)
            r_noisy = np.concatenate([r_noisy, r_fake])
            phi_noisy = np.concatenate([phi_noisy, phi_fake])
            v_noisy = np.concatenate([v_noisy, v_fake])

    detections = tuple(
        RadarDetection(
            range_m=float(ri),
            azimuth=wrap_angle(float(pi)),
            radial_velocity=float(vi),
            timestamp=timestamp,
        )
        for ri, pi, vi in zip(r_noisy, phi_noisy, v_noisy)
        if ri >= 0.0
    )
    return Scan(
        detections=detections,
        sensor_extrinsic=Pose.identity(),
        ego_velocity=(float(vel[0]), float(vel[1])),
        timestamp=timestamp,
    )


def body_velocity(traj: Trajectory, index: int) -> np.ndarray:
    """Body-frame velocity at a trajectory sample (speed along heading)."""
    return np.array([float(traj.speeds[index]), 0.0])


def find_loop_pairs(
    traj_a: Trajectory, traj_b: Trajectory, max_dist: float
) -> list[tuple[int, int]]:
    """Nearest-position sample pairs across two passes, one per a-sample."""
    if len(traj_a) == 0 or len(traj_b) == 0:
        raise ValueError("trajectories must be nonempty")
    tree = cKDTree(traj_b.positions)
    dists, idx = tree.query(traj_a.positions)
    return [(i, int(j)) for i, (d, j) in enumerate(zip(dists, idx)) if d <= max_dist]


@dataclass(frozen=True)
class RouteSpec:
    """One data-collection round: a route driven at a constant speed."""

    waypoints: tuple[tuple[float, float], ...]
    speed: float
    route_id: str = ""


def generate_dataset(
    scene: Scene,
    routes: Sequence[RouteSpec],
    spec: SensorSpec,
    noise: NoiseSpec,
    doppler_on: bool,
    out_dir: str | Path,
    submap_scans: int = 10,
    loop_max_dist: float = 2.0,
    max_pairs: Optional[int] = None,
) -> dict:
    """Simulate all rounds, write scans + ground truth, and a loop-pair
    manifest.

    Loop pairs are found between every pair of rounds; each pair records
    the scan ranges of both submaps, the ground-truth relative transform
    of the pair's anchor frames, and the mean-speed difference. Files are
    byte-identical across runs with equal inputs.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if len(routes) < 2:
        raise ValueError("need at least two rounds to form loop pairs")

    trajectories = []
    route_entries = []
    for ridx, route in enumerate(routes):
        rid = route.route_id or f"round{ridx}"
        traj = generate_trajectory(route.waypoints, route.speed, spec.scan_rate, rid)
        scans = []
        for k in range(len(traj)):
            rng = np.random.default_rng((noise.seed, ridx, k))
            scans.append(
                simulate_scan(
                    scene,
                    traj.poses[k],
                    body_velocity(traj, k),
                    spec,
                    noise,
                    doppler_on,
                    rng,
                    timestamp=float(traj.times[k]),
                )
            )
        scan_file = f"scans_{ridx}.jsonl"
        pose_file = f"poses_{ridx}.json"
        write_scans_jsonl(out / scan_file, scans)
        with open(out / pose_file, "w") as fh:
            json.dump(
                [
                    {"t": float(t), **pose.to_json(), "speed": float(s)}
                    for t, pose, s in zip(traj.times, traj.poses, traj.speeds)
                ],
                fh,
                allow_nan=False,
            )
        trajectories.append(traj)
        route_entries.append(
            {
                "id": rid,
                "scans": scan_file,
                "poses": pose_file,
                "mean_speed": float(route.speed),
                "scan_count": len(traj),
            }
        )

    pairs = []
    for ia in range(len(routes)):
        for ib in range(ia + 1, len(routes)):
            traj_a, traj_b = trajectories[ia], trajectories[ib]
            for sa, sb in find_loop_pairs(traj_a, traj_b, loop_max_dist):
                if sa + submap_scans > len(traj_a) or sb + submap_scans > len(traj_b):
                    continue
                anchor_a = traj_a.poses[sa]
                anchor_b = traj_b.poses[sb]
                gt = anchor_b.inverse().compose(anchor_a)
                pairs.append(
                    {
                        "a": {"route": ia, "start": sa, "count": submap_scans},
                        "b": {"route": ib, "start": sb, "count": submap_scans},
                        "gt": gt.to_json(),
                        "dv": abs(float(traj_a.speeds[sa]) - float(traj_b.speeds[sb])),
                    }
                )
    if max_pairs is not None and len(pairs) > max_pairs:
        stride = len(pairs) / max_pairs
        pairs = [pairs[int(i * stride)] for i in range(max_pairs)]

    manifest = {
        "routes": route_entries,
        "pairs": pairs,
        "sensor": {
            "beta": spec.params.beta,
            "max_range": spec.max_range,
            "fov": spec.fov,
            "scan_rate": spec.scan_rate,
        },
        "noise": {
            "family": noise.family,
            "range_param": noise.range_param,
            "angle_param": noise.angle_param,
            "velocity_param": noise.velocity_param,
            "dof": noise.dof,
            "seed": noise.seed,
            "gamma_shape": noise.gamma_shape,
            "outlier_rate": noise.outlier_rate,
        },
        "doppler_on": doppler_on,
        "submap_scans": submap_scans,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, allow_nan=False)
    return manifest
