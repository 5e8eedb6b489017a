"""Planar rigid-body poses and closed-form alignment helpers.

The whole pipeline works in SE(2); the z axis only reappears at
serialization boundaries, fixed to zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(angle: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    return angle - 2.0 * math.pi * math.ceil((angle - math.pi) / (2.0 * math.pi))


@dataclass(frozen=True)
class Pose:
    """Planar rigid transform: rotation by ``theta`` then translation (x, y)."""

    theta: float = 0.0
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        # keep fields JSON-serializable even when built from numpy scalars
        object.__setattr__(self, "theta", float(self.theta))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))

    @classmethod
    def identity(cls) -> "Pose":
        return cls(0.0, 0.0, 0.0)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y])

    def rotation_matrix(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def compose(self, other: "Pose") -> "Pose":
        """Return self * other (apply ``other`` first, then ``self``)."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose(
            theta=wrap_angle(self.theta + other.theta),
            x=self.x + c * other.x - s * other.y,
            y=self.y + s * other.x + c * other.y,
        )

    def inverse(self) -> "Pose":
        c, s = math.cos(self.theta), math.sin(self.theta)
        return Pose(
            theta=wrap_angle(-self.theta),
            x=-(c * self.x + s * self.y),
            y=-(-s * self.x + c * self.y),
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform planar points, shape (2,) or (N, 2)."""
        pts = np.asarray(points, dtype=float)
        out = pts @ self.rotation_matrix().T
        out += self.translation
        return out

    def to_se3(self) -> np.ndarray:
        """Export as a 4x4 homogeneous matrix with z = 0, roll = pitch = 0."""
        mat = np.eye(4)
        mat[:2, :2] = self.rotation_matrix()
        mat[0, 3] = self.x
        mat[1, 3] = self.y
        return mat

    def to_json(self) -> dict:
        return {"theta": self.theta, "x": self.x, "y": self.y}

    @classmethod
    def from_json(cls, data: dict) -> "Pose":
        return cls(theta=float(data["theta"]), x=float(data["x"]), y=float(data["y"]))


def transform_point(pose: Pose, point: np.ndarray) -> np.ndarray:
    """Apply a planar pose to a 3-vector; z passes through unchanged."""
    p = np.asarray(point, dtype=float)
    xy = pose.apply(p[:2])
    return np.array([xy[0], xy[1], p[2] if p.shape[0] > 2 else 0.0])


def rotate_covariances(theta: float, covs: np.ndarray) -> np.ndarray:
    """Rotate a stack of 2x2 covariances: R @ cov @ R.T for each.

    Covariance of a point is translation-invariant, so rotation is the only
    part of a rigid transform that acts on it.
    """
    c, s = math.cos(theta), math.sin(theta)
    rot = np.array([[c, -s], [s, c]])
    return np.einsum("ij,njk,lk->nil", rot, np.asarray(covs, dtype=float), rot)


def fit_rigid_planar(src: np.ndarray, dst: np.ndarray) -> Pose:
    """Least-squares planar rigid transform mapping ``src`` onto ``dst``.

    Closed-form Kabsch/Umeyama solution without scale, specialized to 2D:
    the optimal rotation angle is atan2 of the summed cross and dot products
    of the centered point pairs.
    """
    src = np.asarray(src, dtype=float)
    dst = np.asarray(dst, dtype=float)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[0] < 2:
        raise ValueError("need two equal-shape (N, 2) arrays with N >= 2")
    src_c = src - src.mean(axis=0)
    dst_c = dst - dst.mean(axis=0)
    cross = float(np.sum(src_c[:, 0] * dst_c[:, 1] - src_c[:, 1] * dst_c[:, 0]))
    dot = float(np.sum(src_c * dst_c))
    theta = math.atan2(cross, dot)
    c, s = math.cos(theta), math.sin(theta)
    sx, sy = src.mean(axis=0)
    dx, dy = dst.mean(axis=0)
    return Pose(theta=theta, x=dx - (c * sx - s * sy), y=dy - (s * sx + c * sy))
