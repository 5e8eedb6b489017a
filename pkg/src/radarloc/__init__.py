"""Doppler-compensated automotive radar metric localization toolkit."""

__version__ = "0.1.0"

from .doppler import (
    RadarDetection,
    RadarParams,
    Scan,
    compensate,
    distort,
    doppler_range_shift,
    polar_to_cartesian,
)
from .geometry import Pose, transform_point
from .uncertainty import CovariantPoint, PolarNoise

__all__ = [
    "__version__",
    "CovariantPoint",
    "PolarNoise",
    "Pose",
    "RadarDetection",
    "RadarParams",
    "Scan",
    "compensate",
    "distort",
    "doppler_range_shift",
    "polar_to_cartesian",
    "transform_point",
]
