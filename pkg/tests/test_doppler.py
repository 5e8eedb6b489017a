import json
import math

import numpy as np
import pytest

from radarloc.doppler import (
    RadarDetection,
    RadarParams,
    Scan,
    compensate,
    distort,
    doppler_range_shift,
    polar_to_cartesian,
    read_scans_jsonl,
    scan_from_json,
    scan_to_json,
    write_scans_jsonl,
)
from radarloc.errors import NegativeRangeError
from radarloc.geometry import Pose

BETA = RadarParams(beta=0.04)


def det(r, v, phi=0.0):
    return RadarDetection(range_m=r, azimuth=phi, radial_velocity=v)


def test_range_shift_values():
    assert doppler_range_shift(10.0, BETA) == pytest.approx(0.4)
    assert doppler_range_shift(0.0, BETA) == 0.0
    assert doppler_range_shift(-5.0, BETA) == pytest.approx(-0.2)


def test_range_shift_linear_in_velocity():
    rng = np.random.default_rng(1)
    for _ in range(100):
        v = rng.uniform(-30, 30)
        a = rng.uniform(-5, 5)
        assert doppler_range_shift(a * v, BETA) == pytest.approx(
            a * doppler_range_shift(v, BETA), abs=1e-15
        )


def test_compensate_removes_shift():
    out = compensate(det(50.4, 10.0), BETA)
    assert out.range_m == pytest.approx(50.0)
    assert out.radial_velocity == 10.0
    assert compensate(det(30.0, 0.0), BETA).range_m == 30.0


def test_distort_applies_shift():
    assert distort(det(50.0, 10.0), BETA).range_m == pytest.approx(50.4)
    # closing target (negative radial velocity) shortens the measured range
    assert distort(det(50.0, -10.0), BETA).range_m == pytest.approx(49.6)


def test_compensate_distort_round_trip():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        d = det(rng.uniform(5, 100), rng.uniform(-25, 25), rng.uniform(-math.pi + 1e-9, math.pi))
        assert abs(distort(compensate(d, BETA), BETA).range_m - d.range_m) <= 1e-12
        assert abs(compensate(distort(d, BETA), BETA).range_m - d.range_m) <= 1e-12


def test_negative_compensated_range_rejected():
    with pytest.raises(NegativeRangeError):
        compensate(det(0.2, 10.0), BETA)
    with pytest.raises(NegativeRangeError):
        distort(det(0.2, -10.0), BETA)


def test_polar_to_cartesian_axes():
    assert np.allclose(polar_to_cartesian(det(10, 0, 0.0)), [10, 0, 0])
    assert np.allclose(polar_to_cartesian(det(10, 0, math.pi / 2)), [0, 10, 0], atol=1e-14)
    assert np.allclose(polar_to_cartesian(det(5, 0, math.pi)), [-5, 0, 0], atol=1e-14)


def test_polar_to_cartesian_preserves_norm():
    rng = np.random.default_rng(2)
    for _ in range(200):
        d = det(rng.uniform(0, 120), 0.0, rng.uniform(-math.pi + 1e-9, math.pi))
        assert np.linalg.norm(polar_to_cartesian(d)) == pytest.approx(d.range_m, abs=1e-12)


def test_params_validation():
    with pytest.raises(ValueError):
        RadarParams(beta=0.0)
    with pytest.raises(ValueError):
        RadarParams(beta=-1.0)
    # chirp constants must be consistent with beta
    params = RadarParams.from_chirp(f_c=77e9, bandwidth=1e9, chirp_duration=520e-9)
    assert params.beta == pytest.approx(77e9 * 520e-9 / 1e9)
    with pytest.raises(ValueError):
        RadarParams(beta=0.05, f_c=77e9, bandwidth=1e9, chirp_duration=520e-9)
    with pytest.raises(ValueError):
        RadarParams(beta=0.04, f_c=77e9)


def test_detection_validation():
    with pytest.raises(ValueError):
        RadarDetection(range_m=-1.0, azimuth=0.0, radial_velocity=0.0)
    with pytest.raises(ValueError):
        RadarDetection(range_m=1.0, azimuth=-math.pi, radial_velocity=0.0)
    RadarDetection(range_m=1.0, azimuth=math.pi, radial_velocity=0.0)


def test_scan_jsonl_round_trip(tmp_path):
    scans = [
        Scan(
            detections=(det(10.0, 1.0, 0.2), det(20.0, -2.0, -0.4)),
            sensor_extrinsic=Pose(theta=0.1, x=1.0, y=0.0),
            ego_velocity=(5.0, 0.0),
            timestamp=0.5,
        ),
        Scan(detections=(), ego_velocity=None, timestamp=1.0),
    ]
    path = tmp_path / "scans.jsonl"
    write_scans_jsonl(path, scans)
    loaded = read_scans_jsonl(path)
    assert len(loaded) == 2
    assert loaded[0].detections[1].range_m == 20.0
    assert loaded[0].detections[0].timestamp == 0.5
    assert loaded[0].ego_velocity == (5.0, 0.0)
    assert loaded[1].ego_velocity is None
    assert loaded[0].sensor_extrinsic == scans[0].sensor_extrinsic

    # the wire format is plain decimal JSON, one scan per line
    lines = path.read_text().strip().split("\n")
    first = json.loads(lines[0])
    assert set(first) == {"t", "extrinsic", "ego_v", "detections"}
    assert set(first["detections"][0]) == {"r", "phi", "v"}


def test_jsonl_rejects_non_finite():
    scan = Scan(detections=(det(float("inf") if False else 1.0, 0.0),), timestamp=0.0)
    data = scan_to_json(scan)
    data["detections"][0]["r"] = float("nan")
    with pytest.raises(ValueError):
        json.dumps(data, allow_nan=False)
    # loader normalizes azimuth into (-pi, pi]
    shifted = scan_from_json(
        {"t": 0.0, "extrinsic": {"theta": 0, "x": 0, "y": 0}, "ego_v": None,
         "detections": [{"r": 5.0, "phi": -math.pi, "v": 0.0}]}
    )
    assert shifted.detections[0].azimuth == pytest.approx(math.pi)
