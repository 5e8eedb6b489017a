"""Coarse descriptor matching and RANSAC geometric verification.

Matching is mutual-nearest-neighbor in descriptor space: each current point
proposes its closest previous descriptor, and the pair survives only if the
previous point agrees. RANSAC then fits a planar rigid transform from
2-point minimal samples and keeps the largest geometrically consistent
subset.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateSampleError, InsufficientInliersError, NoMatchesError
from .geometry import Pose, fit_rigid_planar
from .submap import Submap


@dataclass(frozen=True)
class Correspondence:
    """Index pair: point index_x in the current submap matched to index_y in
    the previous one."""

    index_x: int
    index_y: int


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 500
    inlier_threshold: float = 1.0
    min_inliers: int = 5
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")


def match_descriptors(current: Submap, previous: Submap, k: int = 1) -> list[Correspondence]:
    """Mutually-nearest descriptor pairs between two described submaps.

    With k > 1 a pair survives if each point lies within the other's k
    nearest descriptors; duplicates per current point keep the closest.
    """
    if current.descriptors is None or previous.descriptors is None:
        raise ValueError("both submaps must be described first")
    tree_prev = cKDTree(previous.descriptors)
    tree_cur = cKDTree(current.descriptors)
    d_cur, nn_prev = tree_prev.query(current.descriptors, k=k)
    d_prev, nn_cur = tree_cur.query(previous.descriptors, k=k)
    if k == 1:
        nn_prev = nn_prev[:, None]
        nn_cur = nn_cur[:, None]
        d_cur = d_cur[:, None]

    prev_accepts = [set(row.tolist()) for row in nn_cur]
    matches = []
    for i in range(len(current)):
        best = None
        for slot in range(k):
            j = int(nn_prev[i, slot])
            if j < len(previous) and i in prev_accepts[j]:
                best = j
                break  # query results are distance-sorted
        if best is not None:
            matches.append(Correspondence(index_x=i, index_y=best))
    if not matches:
        raise NoMatchesError("mutual descriptor check left no pairs")
    return matches


def solve_two_point_rigid(
    x1: np.ndarray, x2: np.ndarray, y1: np.ndarray, y2: np.ndarray,
    min_separation: float = 1e-9,
) -> Pose:
    """Exact planar rigid transform mapping (x1, x2) onto (y1, y2).

    Two point pairs overdetermine the 3 DoF; the rotation comes from the
    direction change of the connecting segment. Raises DegenerateSampleError
    when either segment is too short to define a direction.
    """
    dx = x2 - x1
    dy = y2 - y1
    if np.hypot(*dx) < min_separation or np.hypot(*dy) < min_separation:
        raise DegenerateSampleError("sample points are coincident")
    theta = math.atan2(dy[1], dy[0]) - math.atan2(dx[1], dx[0])
    c, s = math.cos(theta), math.sin(theta)
    tx = y1[0] - (c * x1[0] - s * x1[1])
    ty = y1[1] - (s * x1[0] + c * x1[1])
    return Pose(theta=theta, x=tx, y=ty)


def _residuals(T: Pose, src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    return np.linalg.norm(dst - T.apply(src), axis=1)


def ransac_rigid(
    cands: list[Correspondence],
    current: Submap,
    previous: Submap,
    config: RansacConfig = RansacConfig(),
) -> tuple[list[Correspondence], Pose]:
    """Largest-consensus rigid transform over candidate correspondences.

    Samples two correspondences per iteration (per-iteration RNG streams
    derived from the seed, so iteration order never changes the result),
    scores by post-transform residual, then refits by least squares over
    the winning consensus set. Ties in inlier count go to the earliest
    iteration.
    """
    if len(cands) < 2:
        raise InsufficientInliersError(f"need >= 2 candidates, got {len(cands)}")
    src = current.planar_positions[[c.index_x for c in cands]]
    dst = previous.planar_positions[[c.index_y for c in cands]]
    n = len(cands)
    threshold = config.inlier_threshold

    # minimal samples drawn from per-iteration streams, scored in one sweep;
    # argmax takes the first maximum, i.e. the earliest iteration wins ties
    samples = np.empty((config.iterations, 2), dtype=np.int64)
    for it, stream in enumerate(np.random.SeedSequence(config.seed).spawn(config.iterations)):
        samples[it] = np.random.default_rng(stream).choice(n, size=2, replace=False)
    x1, x2 = src[samples[:, 0]], src[samples[:, 1]]
    y1, y2 = dst[samples[:, 0]], dst[samples[:, 1]]
    dx, dy = x2 - x1, y2 - y1
    usable = (np.linalg.norm(dx, axis=1) >= 1e-9) & (np.linalg.norm(dy, axis=1) >= 1e-9)
    theta = np.arctan2(dy[:, 1], dy[:, 0]) - np.arctan2(dx[:, 1], dx[:, 0])
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    tx = y1[:, 0] - (cos_t * x1[:, 0] - sin_t * x1[:, 1])
    ty = y1[:, 1] - (sin_t * x1[:, 0] + cos_t * x1[:, 1])
    moved_x = cos_t[:, None] * src[:, 0] - sin_t[:, None] * src[:, 1] + tx[:, None]
    moved_y = sin_t[:, None] * src[:, 0] + cos_t[:, None] * src[:, 1] + ty[:, None]
    within = (dst[:, 0] - moved_x) ** 2 + (dst[:, 1] - moved_y) ** 2 < threshold**2
    counts = np.where(usable, within.sum(axis=1), -1)
    best = int(np.argmax(counts))
    best_count = int(counts[best])
    best_mask = within[best] if best_count >= 0 else None

    if best_mask is None or best_count < max(config.min_inliers, 2):
        raise InsufficientInliersError(
            f"best consensus {best_count} below min_inliers={config.min_inliers}"
        )

    # Refit on the consensus set and let membership settle under the refit.
    mask = best_mask
    refined = fit_rigid_planar(src[mask], dst[mask])
    for _ in range(5):
        new_mask = _residuals(refined, src, dst) < threshold
        if new_mask.sum() < 2 or np.array_equal(new_mask, mask):
            break
        mask = new_mask
        refined = fit_rigid_planar(src[mask], dst[mask])
    final_mask = _residuals(refined, src, dst) < threshold
    inliers = [c for c, keep in zip(cands, final_mask) if keep]
    return inliers, refined
