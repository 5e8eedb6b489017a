"""Dense radar submaps from consecutive compensated scans, plus descriptors.

A single automotive radar scan is too sparse to localize against, so K
consecutive scans are compensated, expressed in the first scan's body frame
(the anchor), and concatenated. Each point carries the covariance propagated
from its polar measurement, rotated into the anchor frame.

The per-point descriptor is a normalized annular-ring histogram of distances
to the other submap points: rotation- and translation-invariant by
construction, so it survives viewpoint changes between loop-closure visits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .doppler import RadarParams, Scan
from .errors import EmptySubmapError
from .geometry import Pose, rotate_covariances
from .uncertainty import CovariantPoint, PolarNoise, propagate_batch

DEFAULT_SCANS_PER_SUBMAP = 10


@dataclass(frozen=True)
class DescriptorConfig:
    """Annular-ring histogram parameters.

    Ring k collects neighbors at planar distance in [k*ring_width,
    (k+1)*ring_width); the outermost ring edge is the neighborhood radius.
    """

    ring_count: int = 16
    ring_width: float = 2.5

    def __post_init__(self):
        if self.ring_count < 2:
            raise ValueError("ring_count must be >= 2")
        if self.ring_width <= 0:
            raise ValueError("ring_width must be positive")

    @property
    def neighbor_radius(self) -> float:
        return self.ring_count * self.ring_width


@dataclass(frozen=True)
class Submap:
    """Accumulated point set in the anchor frame.

    positions: (N, 3) with z = 0; covariances: (N, 2, 2) planar blocks;
    descriptors: (N, ring_count) once describe() has run, else None.
    source_scans optionally retains the raw (scan, relative pose) inputs for
    baselines that need to redo compensation themselves.
    """

    positions: np.ndarray
    covariances: np.ndarray
    anchor_pose: Pose = field(default_factory=Pose.identity)
    mean_ego_speed: float = 0.0
    scan_count: int = 1
    dropped_count: int = 0
    descriptors: Optional[np.ndarray] = None
    source_scans: Optional[tuple[tuple[Scan, Pose], ...]] = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        cov = np.asarray(self.covariances, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must be (N, 3)")
        if cov.shape != (pos.shape[0], 2, 2):
            raise ValueError("covariances must be (N, 2, 2)")
        if self.descriptors is not None and len(self.descriptors) != len(pos):
            raise ValueError("one descriptor per point required")
        if self.scan_count < 1:
            raise ValueError("scan_count must be >= 1")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "covariances", cov)

    def __len__(self) -> int:
        return self.positions.shape[0]

    @property
    def planar_positions(self) -> np.ndarray:
        return self.positions[:, :2]

    @property
    def points(self) -> list[CovariantPoint]:
        return [
            CovariantPoint(position=p, covariance=c)
            for p, c in zip(self.positions, self.covariances)
        ]

    def to_json(self) -> dict:
        return {
            "anchor": self.anchor_pose.to_json(),
            "mean_speed": self.mean_ego_speed,
            "points": [
                {
                    "p": [float(p[0]), float(p[1])],
                    "cov": [float(c[0, 0]), float(c[0, 1]), float(c[1, 1])],
                }
                for p, c in zip(self.positions, self.covariances)
            ],
            "descriptors": None
            if self.descriptors is None
            else [[float(v) for v in row] for row in self.descriptors],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Submap":
        pts = data["points"]
        n = len(pts)
        positions = np.zeros((n, 3))
        covariances = np.zeros((n, 2, 2))
        for i, entry in enumerate(pts):
            positions[i, :2] = entry["p"]
            sxx, sxy, syy = entry["cov"]
            covariances[i] = [[sxx, sxy], [sxy, syy]]
        desc = data.get("descriptors")
        return cls(
            positions=positions,
            covariances=covariances,
            anchor_pose=Pose.from_json(data["anchor"]),
            mean_ego_speed=float(data["mean_speed"]),
            descriptors=None if desc is None else np.asarray(desc, dtype=float),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, allow_nan=False)

    @classmethod
    def load(cls, path: str | Path) -> "Submap":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def build_submap(
    scans: Sequence[tuple[Scan, Pose]],
    params: RadarParams,
    compensation_on: bool = True,
    noise: PolarNoise = PolarNoise(),
    anchor_pose: Pose = Pose(),
    keep_source: bool = False,
) -> Submap:
    """Accumulate scans into one anchor-frame point set.

    Each (scan, pose) pair gives the scan's body pose relative to the anchor
    (first scan) frame. Detections are Doppler-compensated unless
    ``compensation_on`` is False, in which case the distorted ranges pass
    through untouched and the noise propagation ignores the velocity channel
    (the uncompensated pipeline has no Doppler term to differentiate).
    Detections whose compensated range would be negative are dropped and
    counted.
    """
    if not scans:
        raise ValueError("need at least one scan")
    beta = params.beta if compensation_on else 0.0

    chunks_pos = []
    chunks_cov = []
    dropped = 0
    speeds = []
    for scan, rel_pose in scans:
        if scan.ego_velocity is not None:
            speeds.append(float(np.hypot(*scan.ego_velocity)))
        if not scan.detections:
            continue
        r = np.array([d.range_m for d in scan.detections])
        v = np.array([d.radial_velocity for d in scan.detections])
        phi = np.array([d.azimuth for d in scan.detections])
        keep = (r - beta * v) >= 0.0
        dropped += int(np.count_nonzero(~keep))
        if not keep.any():
            continue
        pos, cov = propagate_batch(r[keep], v[keep], phi[keep], noise, beta)
        to_anchor = rel_pose.compose(scan.sensor_extrinsic)
        chunks_pos.append(to_anchor.apply(pos))
        chunks_cov.append(rotate_covariances(to_anchor.theta, cov))

    if not chunks_pos:
        raise EmptySubmapError("no detections survived submap construction")
    planar = np.vstack(chunks_pos)
    positions = np.hstack([planar, np.zeros((planar.shape[0], 1))])
    return Submap(
        positions=positions,
        covariances=np.vstack(chunks_cov),
        anchor_pose=anchor_pose,
        mean_ego_speed=float(np.mean(speeds)) if speeds else 0.0,
        scan_count=len(scans),
        dropped_count=dropped,
        source_scans=tuple((s, p) for s, p in scans) if keep_source else None,
    )


def describe(submap: Submap, config: DescriptorConfig = DescriptorConfig()) -> Submap:
    """Return a copy of the submap with ring-histogram descriptors attached.

    descriptor[k] counts the other points whose planar distance falls in
    ring k, normalized so each descriptor sums to one. A point with no
    neighbors inside the neighborhood radius gets the uniform vector.
    """
    n = len(submap)
    if n == 0:
        raise EmptySubmapError("cannot describe an empty submap")
    pts = submap.planar_positions
    rings = config.ring_count
    width = config.ring_width
    hist = np.zeros((n, rings))

    chunk = 1024
    for start in range(0, n, chunk):
        block = pts[start : start + chunk]
        rows_here = block.shape[0]
        dists = cdist(block, pts)
        # a point never counts itself: push its self-distance out of range
        own = np.arange(rows_here)
        dists[own, own + start] = rings * width
        ring_idx = np.floor(dists / width).astype(np.int64)
        np.clip(ring_idx, 0, rings, out=ring_idx)
        flat = (np.arange(rows_here)[:, None] * (rings + 1) + ring_idx).ravel()
        counts = np.bincount(flat, minlength=rows_here * (rings + 1))
        hist[start : start + chunk] += counts.reshape(rows_here, rings + 1)[:, :rings]

    totals = hist.sum(axis=1)
    lonely = totals == 0
    hist[lonely] = 1.0 / rings
    totals[lonely] = 1.0
    descriptors = hist / totals[:, None]
    return replace(submap, descriptors=descriptors)
