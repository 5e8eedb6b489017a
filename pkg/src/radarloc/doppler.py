"""Radar measurement types and the Doppler range-distortion model.

An FMCW radar measuring a target with radial velocity v reports a range
shifted by beta * v, where beta = f_c / K and K = B / T_r is the chirp ramp
rate. The radial velocity channel itself is unaffected, which is what makes
explicit compensation possible: subtracting beta * v from the measured range
restores the true geometry.

Sign convention, fixed repo-wide: radial velocity is d(range)/dt, negative
while closing on a target, so a closing target's measured range comes out
short.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NegativeRangeError
from .geometry import Pose, wrap_angle


@dataclass(frozen=True)
class RadarParams:
    """Chirp constants reduced to the Doppler-to-range factor beta (seconds).

    beta may be given directly or derived from the carrier frequency,
    bandwidth, and chirp duration (beta = f_c * T_r / B). When both are
    given they must agree to machine precision.
    """

    beta: float
    f_c: Optional[float] = None
    bandwidth: Optional[float] = None
    chirp_duration: Optional[float] = None

    def __post_init__(self):
        if not self.beta > 0.0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        chirp = (self.f_c, self.bandwidth, self.chirp_duration)
        if any(v is not None for v in chirp):
            if any(v is None for v in chirp):
                raise ValueError("f_c, bandwidth, chirp_duration must be given together")
            derived = self.f_c * self.chirp_duration / self.bandwidth
            if not math.isclose(self.beta, derived, rel_tol=1e-12):
                raise ValueError(
                    f"beta={self.beta} inconsistent with f_c*T_r/B={derived}"
                )

    @classmethod
    def from_chirp(cls, f_c: float, bandwidth: float, chirp_duration: float) -> "RadarParams":
        beta = f_c * chirp_duration / bandwidth
        return cls(beta=beta, f_c=f_c, bandwidth=bandwidth, chirp_duration=chirp_duration)


@dataclass(frozen=True)
class RadarDetection:
    """One polar radar return.

    range_m is the measured (possibly Doppler-distorted) range; azimuth in
    (-pi, pi]; radial_velocity follows the d(range)/dt sign convention.
    """

    range_m: float
    azimuth: float
    radial_velocity: float
    timestamp: float = 0.0

    def __post_init__(self):
        if self.range_m < 0.0:
            raise ValueError(f"range must be nonnegative, got {self.range_m}")
        if not (-math.pi < self.azimuth <= math.pi):
            raise ValueError(f"azimuth {self.azimuth} outside (-pi, pi]")


@dataclass(frozen=True)
class Scan:
    """One radar scan: detections sharing a timestamp, plus mounting info.

    sensor_extrinsic is the radar-to-body transform; ego_velocity is the
    body-frame velocity at scan time when known (simulator ground truth).
    """

    detections: tuple[RadarDetection, ...]
    sensor_extrinsic: Pose = field(default_factory=Pose.identity)
    ego_velocity: Optional[tuple[float, float]] = None
    timestamp: float = 0.0


def doppler_range_shift(radial_velocity: float, params: RadarParams) -> float:
    """Apparent range offset induced by a target's radial velocity."""
    return params.beta * radial_velocity


def compensate(det: RadarDetection, params: RadarParams) -> RadarDetection:
    """Remove the Doppler range shift, restoring the true range.

    Raises NegativeRangeError if the corrected range would be negative;
    such detections are corrupt and should be dropped by the caller.
    """
    corrected = det.range_m - params.beta * det.radial_velocity
    if corrected < 0.0:
        raise NegativeRangeError(
            f"compensated range {corrected:.3f} m < 0 (r={det.range_m}, v={det.radial_velocity})"
        )
    return replace(det, range_m=corrected)


def distort(det: RadarDetection, params: RadarParams) -> RadarDetection:
    """Forward model: apply the Doppler range shift to a true range."""
    shifted = det.range_m + params.beta * det.radial_velocity
    if shifted < 0.0:
        raise NegativeRangeError(
            f"distorted range {shifted:.3f} m < 0 (r={det.range_m}, v={det.radial_velocity})"
        )
    return replace(det, range_m=shifted)


def polar_to_cartesian(det: RadarDetection) -> np.ndarray:
    """Sensor-frame Cartesian position (x, y, 0) of a detection.

    Elevation is not measured; z is kept, fixed at zero, for compatibility
    with 3D consumers.
    """
    return np.array([
        det.range_m * math.cos(det.azimuth),
        det.range_m * math.sin(det.azimuth),
        0.0,
    ])


# --- scan serialization (JSON Lines, one scan per line) ---

def scan_to_json(scan: Scan) -> dict:
    return {
        "t": scan.timestamp,
        "extrinsic": scan.sensor_extrinsic.to_json(),
        "ego_v": list(scan.ego_velocity) if scan.ego_velocity is not None else None,
        "detections": [
            {"r": d.range_m, "phi": d.azimuth, "v": d.radial_velocity}
            for d in scan.detections
        ],
    }


def scan_from_json(data: dict) -> Scan:
    t = float(data["t"])
    ego = data.get("ego_v")
    return Scan(
        detections=tuple(
            RadarDetection(
                range_m=float(d["r"]),
                azimuth=wrap_angle(float(d["phi"])),
                radial_velocity=float(d["v"]),
                timestamp=t,
            )
            for d in data["detections"]
        ),
        sensor_extrinsic=Pose.from_json(data["extrinsic"]),
        ego_velocity=tuple(float(v) for v in ego) if ego is not None else None,
        timestamp=t,
    )


def write_scans_jsonl(path: str | Path, scans: Iterable[Scan]) -> None:
    with open(path, "w") as fh:
        for scan in scans:
            fh.write(json.dumps(scan_to_json(scan), allow_nan=False))
            fh.write("\n")


def read_scans_jsonl(path: str | Path) -> list[Scan]:
    scans = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                scans.append(scan_from_json(json.loads(line)))
    return scans
