"""First-order propagation of polar measurement noise into point covariances.

The measurement vector is (range, radial velocity, azimuth) with diagonal
covariance diag(sigma_r^2, sigma_v^2, sigma_phi^2). The compensated
Cartesian position is

    f(r, v, phi) = ((r - beta*v) cos phi, (r - beta*v) sin phi, 0)

and the Cartesian covariance follows by linearization: Sigma_c = J Sigma_p J^T
with J the Jacobian of f at the raw measurement. The third row of J is zero
(no elevation), so only the planar 2x2 block is stored; a full 3x3 covariance
would be rank-deficient and poison downstream inversions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .doppler import RadarDetection, RadarParams
from .errors import NegativeRangeError

DEFAULT_SIGMA_R = 0.25          # m
DEFAULT_SIGMA_V = 0.1           # m/s
DEFAULT_SIGMA_PHI = math.radians(0.5)


@dataclass(frozen=True)
class PolarNoise:
    """Per-channel measurement noise standard deviations (diagonal model)."""

    sigma_r: float = DEFAULT_SIGMA_R
    sigma_v: float = DEFAULT_SIGMA_V
    sigma_phi: float = DEFAULT_SIGMA_PHI

    def __post_init__(self):
        if self.sigma_r < 0 or self.sigma_v < 0 or self.sigma_phi < 0:
            raise ValueError("noise sigmas must be nonnegative")


@dataclass(frozen=True)
class CovariantPoint:
    """A Cartesian point (z = 0) with its planar 2x2 position covariance."""

    position: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        if pos.shape != (3,) or cov.shape != (2, 2):
            raise ValueError("position must be (3,), covariance (2, 2)")
        if abs(cov[0, 1] - cov[1, 0]) > 1e-12:
            raise ValueError("covariance must be symmetric")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "covariance", cov)


def compensated_cartesian(det: RadarDetection, params: RadarParams) -> np.ndarray:
    """Doppler-compensated sensor-frame position ((r - beta*v) along azimuth)."""
    r_true = det.range_m - params.beta * det.radial_velocity
    if r_true < 0.0:
        raise NegativeRangeError(f"compensated range {r_true:.3f} m < 0")
    return np.array([
        r_true * math.cos(det.azimuth),
        r_true * math.sin(det.azimuth),
        0.0,
    ])


def jacobian(det: RadarDetection, params: RadarParams) -> np.ndarray:
    """Jacobian of the compensated polar-to-Cartesian map w.r.t. (r, v, phi)."""
    beta = params.beta
    c, s = math.cos(det.azimuth), math.sin(det.azimuth)
    r_true = det.range_m - beta * det.radial_velocity
    return np.array([
        [c, -beta * c, -r_true * s],
        [s, -beta * s, r_true * c],
        [0.0, 0.0, 0.0],
    ])


def propagate_covariance(
    det: RadarDetection, noise: PolarNoise, params: RadarParams
) -> CovariantPoint:
    """Propagate polar noise through the compensation + conversion map."""
    jac = jacobian(det, params)[:2, :]
    sigma_p = np.diag([noise.sigma_r**2, noise.sigma_v**2, noise.sigma_phi**2])
    cov = jac @ sigma_p @ jac.T
    return CovariantPoint(position=compensated_cartesian(det, params), covariance=cov)


def propagate_batch(
    ranges: np.ndarray,
    velocities: np.ndarray,
    azimuths: np.ndarray,
    noise: PolarNoise,
    beta: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized propagation for a whole scan.

    Returns (positions (N, 2), covariances (N, 2, 2)) in the sensor frame.
    ``beta`` is a plain scalar so callers can zero it to model an
    uncompensated pipeline. Negative compensated ranges are the caller's
    responsibility to filter beforehand.
    """
    r = np.asarray(ranges, dtype=float)
    v = np.asarray(velocities, dtype=float)
    phi = np.asarray(azimuths, dtype=float)
    r_true = r - beta * v
    c, s = np.cos(phi), np.sin(phi)

    positions = np.stack([r_true * c, r_true * s], axis=1)

    # Planar rows of the Jacobian, one (2, 3) block per detection.
    jac = np.empty((r.size, 2, 3))
    jac[:, 0, 0] = c
    jac[:, 0, 1] = -beta * c
    jac[:, 0, 2] = -r_true * s
    jac[:, 1, 0] = s
    jac[:, 1, 1] = -beta * s
    jac[:, 1, 2] = r_true * c
    variances = np.array([noise.sigma_r**2, noise.sigma_v**2, noise.sigma_phi**2])
    covs = np.einsum("nik,k,njk->nij", jac, variances, jac)
    return positions, covs
