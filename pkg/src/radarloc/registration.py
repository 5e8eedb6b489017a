"""Rigid submap registration: uncertainty-weighted MLE solver and baselines.

The flagship solver minimizes the covariance-normalized matching cost

    sum_i rho_c( d_i^T (Sigma_y,i + R Sigma_x,i R^T)^{-1} d_i ),
    d_i = y_i - T x_i,

over the planar pose T = (x, y, theta), with a Cauchy robust kernel
rho_c(s) = c^2 ln(1 + s / c^2) bounding each term's influence. Solved by
Levenberg-Marquardt on the 3 parameters; the combined covariance is
refreshed with the current rotation every iteration (a config flag freezes
it at the initial guess instead).

Baselines: point-to-point ICP, grid NDT, and an ego-motion compensation
scheme that predicts radial velocities from scan-to-scan odometry instead
of using measured ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .association import Correspondence, RansacConfig, match_descriptors, ransac_rigid
from .doppler import RadarParams, Scan
from .errors import (
    EmptyGridError,
    InsufficientInliersError,
    NoMatchesError,
    SingularCovarianceError,
)
from .geometry import Pose, fit_rigid_planar, wrap_angle
from .submap import DescriptorConfig, Submap, describe

COND_BOUND = 1e12


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 50
    param_tolerance: float = 1e-8
    cost_tolerance: float = 1e-10
    initial_damping: float = 1e-3
    cauchy_scale: float = 2.0
    refresh_weights: bool = True

    def __post_init__(self):
        if self.param_tolerance <= 0 or self.cost_tolerance <= 0:
            raise ValueError("tolerances must be positive")
        if self.cauchy_scale <= 0:
            raise ValueError("cauchy_scale must be positive")


@dataclass(frozen=True)
class RegistrationResult:
    transform: Pose
    iterations: int
    final_cost: float
    converged: bool
    inlier_count: int

    def to_json(self) -> dict:
        return {
            "theta": self.transform.theta,
            "t": [self.transform.x, self.transform.y],
            "iters": self.iterations,
            "cost": self.final_cost,
            "converged": self.converged,
            "inliers": self.inlier_count,
        }


def _check_invertible(covs: np.ndarray) -> None:
    """Reject 2x2 covariances whose condition number exceeds COND_BOUND."""
    a = covs[..., 0, 0]
    d = covs[..., 1, 1]
    det = a * d - covs[..., 0, 1] * covs[..., 1, 0]
    tr = a + d
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * det, 0.0))
    lam_max = 0.5 * (tr + disc)
    lam_min = 0.5 * (tr - disc)
    if np.any(lam_min * COND_BOUND <= lam_max):
        raise SingularCovarianceError("combined covariance not invertible within 1e12")


def _invert_2x2(covs: np.ndarray) -> np.ndarray:
    _check_invertible(covs)
    a = covs[..., 0, 0]
    b = covs[..., 0, 1]
    c = covs[..., 1, 0]
    d = covs[..., 1, 1]
    det = a * d - b * c
    inv = np.empty_like(covs)
    inv[..., 0, 0] = d
    inv[..., 0, 1] = -b
    inv[..., 1, 0] = -c
    inv[..., 1, 1] = a
    return inv / det[..., None, None]


def residual(
    T: Pose, corr: Correspondence, current: Submap, previous: Submap
) -> tuple[np.ndarray, np.ndarray]:
    """Matching residual and combined covariance for one correspondence.

    d = y - T x; S = Sigma_y + R Sigma_x R^T. Only the rotation block acts
    on the covariance (covariance of a point is translation-invariant).
    """
    x = current.planar_positions[corr.index_x]
    y = previous.planar_positions[corr.index_y]
    d = y - T.apply(x)
    rot = T.rotation_matrix()
    combined = previous.covariances[corr.index_y] + rot @ current.covariances[corr.index_x] @ rot.T
    _check_invertible(combined)
    return d, combined


def _rigid_arrays(
    current: Submap, previous: Submap, inliers: list[Correspondence]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ix = [c.index_x for c in inliers]
    iy = [c.index_y for c in inliers]
    return (
        current.planar_positions[ix],
        previous.planar_positions[iy],
        current.covariances[ix],
        previous.covariances[iy],
    )


def residual_jacobian(T: Pose, points: np.ndarray) -> np.ndarray:
    """d(residual)/d(x, y, theta) for d = y - T x, shape (N, 2, 3).

    The translation block is -I; the rotation column is -(dR/dtheta) x.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    rot = T.rotation_matrix()
    jac = np.zeros((pts.shape[0], 2, 3))
    jac[:, 0, 0] = -1.0
    jac[:, 1, 1] = -1.0
    dr = np.array([[-rot[1, 0], -rot[0, 0]], [rot[0, 0], -rot[1, 0]]])
    jac[:, :, 2] = -(pts @ dr.T)
    return jac


def _solve_pose_mle(
    X: np.ndarray,
    Y: np.ndarray,
    Cx: np.ndarray | None,
    Cy: np.ndarray | None,
    init_T: Pose,
    config: SolverConfig,
    trace: list | None = None,
) -> tuple[Pose, int, float, bool]:
    """LM core. Cx/Cy None means unit weights (unweighted variant).

    ``trace``, when given, collects the cost after every accepted step.
    """
    weighted = Cx is not None
    c2 = config.cauchy_scale**2
    params = np.array([init_T.x, init_T.y, init_T.theta])
    frozen_inv = None
    if weighted and not config.refresh_weights:
        rot = init_T.rotation_matrix()
        frozen_inv = _invert_2x2(Cy + np.einsum("ij,njk,lk->nil", rot, Cx, rot))

    def state(p):
        cos_t, sin_t = math.cos(p[2]), math.sin(p[2])
        rot = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
        d = Y - (X @ rot.T + p[:2])
        if not weighted:
            inv_s = None
            s = np.einsum("ni,ni->n", d, d)
        else:
            if frozen_inv is not None:
                inv_s = frozen_inv
            else:
                inv_s = _invert_2x2(Cy + np.einsum("ij,njk,lk->nil", rot, Cx, rot))
            s = np.einsum("ni,nij,nj->n", d, inv_s, d)
        cost = float(np.sum(c2 * np.log1p(s / c2)))
        return rot, d, inv_s, s, cost

    rot, d, inv_s, s, cost = state(params)
    if trace is not None:
        trace.append(cost)
    damping = config.initial_damping
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        w = 1.0 / (1.0 + s / c2)
        jac = residual_jacobian(Pose(theta=params[2]), X)
        if weighted:
            hess = np.einsum("n,nai,nab,nbj->ij", w, jac, inv_s, jac)
            grad = np.einsum("n,nai,nab,nb->i", w, jac, inv_s, d)
        else:
            hess = np.einsum("n,nai,naj->ij", w, jac, jac)
            grad = np.einsum("n,nai,na->i", w, jac, d)

        scale = np.diag(np.maximum(np.diag(hess), 1e-12))
        try:
            step = np.linalg.solve(hess + damping * scale, -grad)
        except np.linalg.LinAlgError:
            damping *= 10.0
            continue
        trial = params + step
        trial[2] = wrap_angle(trial[2])
        t_rot, t_d, t_inv, t_s, t_cost = state(trial)
        if t_cost <= cost:
            decrease = cost - t_cost
            params, rot, d, inv_s, s = trial, t_rot, t_d, t_inv, t_s
            prev_cost, cost = cost, t_cost
            if trace is not None:
                trace.append(cost)
            damping = max(damping / 10.0, 1e-12)
            if np.max(np.abs(step)) < config.param_tolerance:
                converged = True
                break
            if decrease < config.cost_tolerance * max(prev_cost, 1e-30):
                converged = True
                break
        else:
            damping *= 10.0
            if damping > 1e14:
                break
    pose = Pose(theta=wrap_angle(params[2]), x=params[0], y=params[1])
    return pose, iterations, cost, converged


def register(
    current: Submap,
    previous: Submap,
    inliers: list[Correspondence],
    init_T: Pose = Pose(),
    config: SolverConfig = SolverConfig(),
    trace: list | None = None,
) -> RegistrationResult:
    """Uncertainty-weighted robust registration over matched inliers."""
    if len(inliers) < 3:
        raise InsufficientInliersError(f"need >= 3 inliers, got {len(inliers)}")
    X, Y, Cx, Cy = _rigid_arrays(current, previous, inliers)
    pose, iters, cost, conv = _solve_pose_mle(X, Y, Cx, Cy, init_T, config, trace)
    return RegistrationResult(pose, iters, cost, conv, len(inliers))


def register_unweighted(
    current: Submap,
    previous: Submap,
    inliers: list[Correspondence],
    init_T: Pose = Pose(),
    config: SolverConfig = SolverConfig(),
    trace: list | None = None,
) -> RegistrationResult:
    """Same robust solver with the combined covariance pinned to identity."""
    if len(inliers) < 3:
        raise InsufficientInliersError(f"need >= 3 inliers, got {len(inliers)}")
    X, Y, _, _ = _rigid_arrays(current, previous, inliers)
    pose, iters, cost, conv = _solve_pose_mle(X, Y, None, None, init_T, config, trace)
    return RegistrationResult(pose, iters, cost, conv, len(inliers))


def icp_register(
    current: Submap,
    previous: Submap,
    init_T: Pose = Pose(),
    config: SolverConfig = SolverConfig(),
) -> RegistrationResult:
    """Classic point-to-point ICP with trimmed nearest-neighbor pairing.

    Pairs farther than 3x the median pair distance are dropped each
    iteration, a standard guard against partial-overlap drift.
    """
    if len(current) == 0 or len(previous) == 0:
        raise ValueError("both submaps must be nonempty")
    src = current.planar_positions
    tree = cKDTree(previous.planar_positions)
    T = init_T
    converged = False
    cost = float("inf")
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        moved = T.apply(src)
        dists, idx = tree.query(moved)
        median = float(np.median(dists))
        keep = dists <= max(3.0 * median, 1e-12)
        if keep.sum() < 2:
            break
        new_T = fit_rigid_planar(src[keep], previous.planar_positions[idx[keep]])
        step = math.hypot(new_T.x - T.x, new_T.y - T.y) + abs(
            wrap_angle(new_T.theta - T.theta)
        )
        T = new_T
        cost = float(np.mean(dists[keep] ** 2))
        if step < config.param_tolerance:
            converged = True
            break
    return RegistrationResult(T, iterations, cost, converged, int(len(src)))


class _NdtGrid:
    """Square-cell normal-distribution grid over a reference cloud.

    Cells with fewer than 3 points are skipped; cell covariances are
    regularized so the smallest eigenvalue is at least 1e-3 of the largest.

    The match score of a query cloud is the summed Gaussian log-likelihood
    of each point under its containing cell, i.e. minus the sum of (capped)
    squared Mahalanobis distances. At exact alignment of identical clouds
    every per-cell deviation sum vanishes, so the score is exactly
    stationary there, which is what lets the clean-fixture recovery checks
    hold to tight tolerances. Points landing in an unoccupied cell pay the
    cap, bounding the influence of non-overlap.
    """

    MAHALANOBIS_CAP = 36.0  # 6 sigma

    def __init__(self, points: np.ndarray, cell_size: float):
        self.cell_size = cell_size
        cells = np.floor(points / cell_size).astype(np.int64)
        keys = self._encode(cells[:, 0], cells[:, 1])
        order = np.argsort(keys, kind="stable")
        sorted_keys = keys[order]
        uniq, starts, counts = np.unique(sorted_keys, return_index=True, return_counts=True)
        means, inv_covs, kept = [], [], []
        for key, start, count in zip(uniq, starts, counts):
            if count < 3:
                continue
            members = points[order[start : start + count]]
            mu = members.mean(axis=0)
            cov = np.cov(members.T, bias=False)
            vals, vecs = np.linalg.eigh(cov)
            vals = np.maximum(vals, max(1e-3 * vals[-1], 1e-9))
            cov = vecs @ np.diag(vals) @ vecs.T
            means.append(mu)
            inv_covs.append(np.linalg.inv(cov))
            kept.append(key)
        if not kept:
            raise EmptyGridError("no grid cell holds >= 3 points")
        self.keys = np.asarray(kept, dtype=np.int64)
        self.means = np.asarray(means)
        self.inv_covs = np.asarray(inv_covs)

    @staticmethod
    def _encode(ix: np.ndarray, iy: np.ndarray) -> np.ndarray:
        return (ix.astype(np.int64) << 32) ^ (iy.astype(np.int64) & 0xFFFFFFFF)

    def mismatch(self, points: np.ndarray) -> float:
        """Capped Mahalanobis sum of each point to its containing cell."""
        cells = np.floor(points / self.cell_size).astype(np.int64)
        keys = self._encode(cells[:, 0], cells[:, 1])
        slots = np.searchsorted(self.keys, keys)
        slots = np.clip(slots, 0, len(self.keys) - 1)
        hit = self.keys[slots] == keys
        total = float(np.count_nonzero(~hit)) * self.MAHALANOBIS_CAP
        if hit.any():
            diff = points[hit] - self.means[slots[hit]]
            m = np.einsum("ni,nij,nj->n", diff, self.inv_covs[slots[hit]], diff)
            total += float(np.sum(np.minimum(m, self.MAHALANOBIS_CAP)))
        return total


def ndt_register(
    current: Submap,
    previous: Submap,
    init_T: Pose = Pose(),
    config: SolverConfig = SolverConfig(),
    cell_size: float = 5.0,
) -> RegistrationResult:
    """Grid NDT: maximize the per-cell Gaussian likelihood of the
    transformed current cloud against normal models of the previous one.

    Cell assignment alternates with a damped Gauss-Newton step on the
    assigned quadratic score; assignments freeze near the optimum, so the
    endgame is a plain Newton polish.
    """
    grid = _NdtGrid(previous.planar_positions, cell_size)
    src = current.planar_positions
    n = src.shape[0]
    cap = _NdtGrid.MAHALANOBIS_CAP

    params = np.array([init_T.x, init_T.y, init_T.theta])
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iterations + 1):
        cos_t, sin_t = math.cos(params[2]), math.sin(params[2])
        rot = np.array([[cos_t, -sin_t], [sin_t, cos_t]])
        moved = src @ rot.T + params[:2]

        cells = np.floor(moved / cell_size).astype(np.int64)
        keys = _NdtGrid._encode(cells[:, 0], cells[:, 1])
        slots = np.clip(np.searchsorted(grid.keys, keys), 0, len(grid.keys) - 1)
        hit = grid.keys[slots] == keys
        if not hit.any():
            break
        diff = moved[hit] - grid.means[slots[hit]]
        inv_cov = grid.inv_covs[slots[hit]]
        m = np.einsum("ni,nij,nj->n", diff, inv_cov, diff)
        active = m < cap  # capped points contribute no gradient
        if not active.any():
            break
        diff, inv_cov = diff[active], inv_cov[active]
        # d(moved)/d(x, y, theta): translation block I, rotation column R' x
        jac = np.zeros((diff.shape[0], 2, 3))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        dr = np.array([[-sin_t, -cos_t], [cos_t, -sin_t]])
        jac[:, :, 2] = src[hit][active] @ dr.T
        hess = np.einsum("nai,nab,nbj->ij", jac, inv_cov, jac)
        grad = np.einsum("nai,nab,nb->i", jac, inv_cov, diff)
        hess += 1e-9 * np.diag(np.maximum(np.diag(hess), 1.0))
        try:
            step = np.linalg.solve(hess, -grad)
        except np.linalg.LinAlgError:
            break
        params = params + step
        params[2] = wrap_angle(params[2])
        if np.max(np.abs(step)) < config.param_tolerance:
            converged = True
            break

    pose = Pose(theta=wrap_angle(params[2]), x=params[0], y=params[1])
    cos_t, sin_t = math.cos(pose.theta), math.sin(pose.theta)
    final = grid.mismatch(src @ np.array([[cos_t, -sin_t], [sin_t, cos_t]]).T + np.array([pose.x, pose.y]))
    return RegistrationResult(pose, iterations, final, converged, n)


def _scan_clouds_with_predicted_velocity(
    scans: tuple[tuple[Scan, Pose], ...],
    velocities: list[np.ndarray],
    beta: float,
) -> list[np.ndarray]:
    """Body-frame clouds after compensating with per-scan velocity estimates.

    The predicted radial velocity of a static target is the negated
    projection of body velocity onto the line of sight.
    """
    clouds = []
    for (scan, _), vel in zip(scans, velocities):
        if not scan.detections:
            clouds.append(np.zeros((0, 2)))
            continue
        ext = scan.sensor_extrinsic
        v_sensor = ext.rotation_matrix().T @ vel
        r = np.array([d.range_m for d in scan.detections])
        phi = np.array([d.azimuth for d in scan.detections])
        los = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        predicted = -(los @ v_sensor)
        r_fixed = np.maximum(r - beta * predicted, 0.0)
        clouds.append(ext.apply(r_fixed[:, None] * los))
    return clouds


def _icp_cloud(src: np.ndarray, dst: np.ndarray, init: Pose, tol: float = 1e-6,
               max_iter: int = 30) -> Pose:
    """Small trimmed ICP between two bare planar clouds."""
    if len(src) < 2 or len(dst) < 2:
        return init
    tree = cKDTree(dst)
    T = init
    for _ in range(max_iter):
        moved = T.apply(src)
        dists, idx = tree.query(moved)
        keep = dists <= max(3.0 * float(np.median(dists)), 1e-12)
        if keep.sum() < 2:
            return T
        new_T = fit_rigid_planar(src[keep], dst[idx[keep]])
        step = math.hypot(new_T.x - T.x, new_T.y - T.y) + abs(
            wrap_angle(new_T.theta - T.theta)
        )
        T = new_T
        if step < tol:
            break
    return T


def _infer_submap_velocities(
    scans: tuple[tuple[Scan, Pose], ...], beta: float, cycles: int
) -> list[np.ndarray]:
    """Per-scan body velocities from scan-to-scan radar odometry.

    Consecutive clouds are registered with ICP; the estimated displacement
    over the scan interval gives the body velocity. Compensation and
    re-registration alternate for the requested number of cycles, starting
    from uncompensated clouds.
    """
    count = len(scans)
    velocities = [np.zeros(2) for _ in range(count)]
    if count < 2:
        return velocities
    times = [scan.timestamp for scan, _ in scans]
    steps: list[Pose] = [Pose()] * (count - 1)
    for _ in range(cycles):
        clouds = _scan_clouds_with_predicted_velocity(scans, velocities, beta)
        for k in range(count - 1):
            steps[k] = _icp_cloud(clouds[k + 1], clouds[k], steps[k])
        new_velocities = []
        for k in range(count - 1):
            dt = times[k + 1] - times[k]
            if dt <= 0:
                new_velocities.append(velocities[k])
            else:
                new_velocities.append(np.array([steps[k].x, steps[k].y]) / dt)
        new_velocities.append(new_velocities[-1])
        velocities = new_velocities
    return velocities


def egomotion_compensated_register(
    current: Submap,
    previous: Submap,
    init_T: Pose = Pose(),
    config: SolverConfig = SolverConfig(),
    params: RadarParams = RadarParams(beta=0.04),
    descriptor_config: DescriptorConfig = DescriptorConfig(),
    ransac_config: RansacConfig = RansacConfig(),
    cycles: int = 2,
) -> RegistrationResult:
    """Doppler handling without velocity measurements, as a spinning-radar
    system must do it: infer each scan's ego velocity from scan-to-scan
    odometry on the (initially distorted) clouds, predict per-detection
    radial velocities from the static-world projection, compensate ranges
    with the predictions, and re-run the odometry; after two cycles,
    register the re-built submaps with the unweighted robust solver.

    Both submaps must have been built with ``keep_source=True`` so the raw
    polar detections are still available.
    """
    if current.source_scans is None or previous.source_scans is None:
        raise ValueError("submaps must retain raw source scans")
    beta = params.beta

    rebuilt = []
    for submap in (current, previous):
        scans = submap.source_scans
        velocities = _infer_submap_velocities(scans, beta, cycles)
        clouds = _scan_clouds_with_predicted_velocity(scans, velocities, beta)
        pieces = [pose.apply(cloud) for (_, pose), cloud in zip(scans, clouds) if len(cloud)]
        planar = np.vstack(pieces)
        rebuilt.append(
            Submap(
                positions=np.hstack([planar, np.zeros((planar.shape[0], 1))]),
                covariances=np.zeros((planar.shape[0], 2, 2)),
                anchor_pose=submap.anchor_pose,
                mean_ego_speed=submap.mean_ego_speed,
                scan_count=submap.scan_count,
            )
        )
    cur_fixed = describe(rebuilt[0], descriptor_config)
    prev_fixed = describe(rebuilt[1], descriptor_config)
    try:
        cands = match_descriptors(cur_fixed, prev_fixed)
        inliers, coarse = ransac_rigid(cands, cur_fixed, prev_fixed, ransac_config)
        if len(inliers) < 3:
            inliers, coarse = cands, init_T
    except (NoMatchesError, InsufficientInliersError):
        try:
            inliers, coarse = match_descriptors(cur_fixed, prev_fixed), init_T
        except NoMatchesError:
            return RegistrationResult(init_T, 0, float("inf"), False, 0)
    return register_unweighted(cur_fixed, prev_fixed, inliers, coarse, config)


def compose_global(T_prev_world: Pose, T_body_prev: Pose) -> Pose:
    """World pose of the current body frame given the previous submap's
    world pose and the estimated relative transform."""
    return T_prev_world.compose(T_body_prev)
