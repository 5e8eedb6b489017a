import json
import math
from pathlib import Path

import numpy as np
import pytest

from radarloc.doppler import RadarParams, compensate, polar_to_cartesian, read_scans_jsonl
from radarloc.geometry import Pose, transform_point
from radarloc.simulator import (
    NoiseSpec,
    RouteSpec,
    SensorSpec,
    Scene,
    body_velocity,
    find_loop_pairs,
    generate_dataset,
    generate_scene,
    generate_trajectory,
    sample_noise,
    simulate_scan,
)

SILENT = NoiseSpec.silent()


def test_scene_determinism_and_bounds():
    one = generate_scene(1, 10.0, seed=7)
    assert one.landmarks.shape == (1, 2)
    assert np.array_equal(one.landmarks, generate_scene(1, 10.0, seed=7).landmarks)

    big = generate_scene(500, 200.0, seed=1)
    assert big.landmarks.shape == (500, 2)
    assert np.all(np.abs(big.landmarks) <= 200.0)
    assert np.array_equal(big.landmarks, generate_scene(500, 200.0, seed=1).landmarks)

    with pytest.raises(ValueError):
        generate_scene(0, 10.0, seed=0)


def test_trajectory_sampling_arithmetic():
    traj = generate_trajectory([(0.0, 0.0), (100.0, 0.0)], 20.0, 13.0)
    assert len(traj) == 66  # endpoints included: 5 s at 13 Hz
    gaps = np.diff(traj.positions[:, 0])
    assert np.allclose(gaps, 20.0 / 13.0)
    assert traj.poses[0].theta == 0.0


def test_trajectory_same_route_two_speeds():
    route = [(0.0, 0.0), (50.0, 0.0), (50.0, 40.0)]
    fast = generate_trajectory(route, 20.0, 13.0)
    slow = generate_trajectory(route, 11.1, 13.0)
    # same path, different timing: every sample lies on the route polyline
    for traj in (fast, slow):
        for p in traj.poses:
            on_first = abs(p.y) < 1e-9 and -1e-9 <= p.x <= 50 + 1e-9
            on_second = abs(p.x - 50.0) < 1e-9 and -1e-9 <= p.y <= 40 + 1e-9
            assert on_first or on_second
    assert fast.times[-1] < slow.times[-1]


def test_trajectory_rejects_degenerate_routes():
    with pytest.raises(ValueError):
        generate_trajectory([(0.0, 0.0)], 10.0)
    with pytest.raises(ValueError):
        generate_trajectory([(1.0, 1.0), (1.0, 1.0)], 10.0)


def stacked_scene(landmark, copies, extent=200.0):
    return Scene(landmarks=np.tile(landmark, (copies, 1)), seed=0, extent=extent)


def test_stationary_scan_measures_true_ranges():
    scene = generate_scene(100, 80.0, seed=3)
    scan = simulate_scan(scene, Pose(), [0.0, 0.0], SensorSpec(), SILENT, True,
                         np.random.default_rng(0))
    assert len(scan.detections) > 0
    spec = SensorSpec()
    for det in scan.detections:
        pos = transform_point(Pose(), polar_to_cartesian(det))
        dists = np.linalg.norm(scene.landmarks - pos[:2], axis=1)
        assert dists.min() < 1e-9
        assert det.range_m <= spec.max_range
        assert det.radial_velocity == 0.0


def test_closing_target_measures_short():
    scene = stacked_scene(np.array([50.0, 0.0]), 1)
    scan = simulate_scan(scene, Pose(), [10.0, 0.0], SensorSpec(), SILENT, True,
                         np.random.default_rng(0))
    det = scan.detections[0]
    assert det.radial_velocity == pytest.approx(-10.0)
    assert det.range_m == pytest.approx(49.6)


def test_compensation_inverts_simulation():
    # the simulator's forward distortion and the compensator are exact inverses
    scene = generate_scene(150, 90.0, seed=5)
    params = SensorSpec().params
    rng = np.random.default_rng(8)
    pose = Pose(theta=0.4, x=5.0, y=-3.0)
    scan = simulate_scan(scene, pose, [14.0, 1.0], SensorSpec(), SILENT, True, rng)
    for det in scan.detections:
        fixed = compensate(det, params)
        pos = transform_point(pose, polar_to_cartesian(fixed))
        dists = np.linalg.norm(scene.landmarks - pos[:2], axis=1)
        assert dists.min() <= 1e-9


def test_fov_and_range_filtering():
    scene = generate_scene(400, 300.0, seed=9)
    spec = SensorSpec()
    noise = NoiseSpec(seed=2)
    scan = simulate_scan(scene, Pose(), [10.0, 0.0], spec, noise, True,
                         np.random.default_rng(1))
    for det in scan.detections:
        assert det.range_m <= spec.max_range + 5 * noise.range_param
        assert abs(det.azimuth) <= spec.fov / 2 + 5 * noise.angle_param


def test_gaussian_scan_noise_statistics():
    # 1e5 copies of one landmark: per-channel sample stds match the spec
    scene = stacked_scene(np.array([50.0, 5.0]), 100_000)
    noise = NoiseSpec(seed=11)
    scan = simulate_scan(scene, Pose(), [8.0, 0.0], SensorSpec(), noise, True,
                         np.random.default_rng(11))
    r = np.array([d.range_m for d in scan.detections])
    phi = np.array([d.azimuth for d in scan.detections])
    v = np.array([d.radial_velocity for d in scan.detections])
    assert abs(r.std() - 0.25) / 0.25 < 0.02
    assert abs(phi.std() - math.radians(0.5)) / math.radians(0.5) < 0.02
    assert abs(v.std() - 0.1) / 0.1 < 0.02


def test_sample_noise_zero_param():
    rng = np.random.default_rng(0)
    silent = NoiseSpec(range_param=0.0, angle_param=0.0, velocity_param=0.0)
    assert sample_noise(silent, "range", rng) == 0.0
    assert sample_noise(silent, "angle", rng) == 0.0


def test_sample_noise_gaussian_variance():
    rng = np.random.default_rng(21)
    draws = np.array([sample_noise(NoiseSpec(), "range", rng) for _ in range(200_000)])
    assert abs(draws.var() - 0.0625) / 0.0625 < 0.02


def test_sample_noise_student_t_variance():
    rng = np.random.default_rng(22)
    spec = NoiseSpec.student_t(dof=100.0)
    draws = np.array([sample_noise(spec, "range", rng) for _ in range(200_000)])
    expected = 0.0625 * 100.0 / 98.0
    assert abs(draws.var() - expected) / expected < 0.03


def test_sample_noise_gamma_zero_centered():
    rng = np.random.default_rng(23)
    spec = NoiseSpec.gamma()
    draws = np.array([sample_noise(spec, "range", rng) for _ in range(200_000)])
    assert abs(draws.mean()) < 0.005
    assert abs(draws.var() - 0.0625) / 0.0625 < 0.03
    # right-skewed by construction
    assert ((draws - draws.mean()) ** 3).mean() > 0


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(family="uniform")
    with pytest.raises(ValueError):
        NoiseSpec(family="student_t", dof=2.0)
    with pytest.raises(ValueError):
        NoiseSpec(range_param=-0.1)


def test_find_loop_pairs_identity():
    traj = generate_trajectory([(0.0, 0.0), (60.0, 0.0)], 15.0)
    pairs = find_loop_pairs(traj, traj, max_dist=1.0)
    assert pairs == [(i, i) for i in range(len(traj))]


def test_find_loop_pairs_disjoint():
    a = generate_trajectory([(0.0, 0.0), (50.0, 0.0)], 15.0)
    b = generate_trajectory([(0.0, 1000.0), (50.0, 1000.0)], 15.0)
    assert find_loop_pairs(a, b, max_dist=5.0) == []


def test_find_loop_pairs_speed_gap():
    route = [(0.0, 0.0), (120.0, 0.0)]
    fast = generate_trajectory(route, 20.0)
    slow = generate_trajectory(route, 11.1)
    pairs = find_loop_pairs(fast, slow, max_dist=2.0)
    assert len(pairs) > 0
    for ia, ib in pairs:
        gap = np.linalg.norm(fast.positions[ia] - slow.positions[ib])
        assert gap <= 2.0
        assert abs(fast.speeds[ia] - slow.speeds[ib]) == pytest.approx(8.9)


def dataset_args(tmp_path, **overrides):
    args = dict(
        scene=generate_scene(200, 120.0, seed=4),
        routes=[
            RouteSpec(waypoints=((-40.0, 0.0), (40.0, 0.0)), speed=20.0),
            RouteSpec(waypoints=((-40.0, 0.0), (40.0, 0.0)), speed=11.1),
        ],
        spec=SensorSpec(),
        noise=NoiseSpec(seed=6),
        doppler_on=True,
        out_dir=tmp_path,
    )
    args.update(overrides)
    return args


def test_generate_dataset_structure(tmp_path):
    manifest = generate_dataset(**dataset_args(tmp_path / "d1"))
    root = tmp_path / "d1"
    assert (root / "manifest.json").is_file()
    assert len(manifest["routes"]) == 2
    assert len(manifest["pairs"]) >= 1
    total_lines = 0
    for route in manifest["routes"]:
        scan_path = root / route["scans"]
        assert scan_path.is_file()
        assert (root / route["poses"]).is_file()
        total_lines += len(scan_path.read_text().strip().split("\n"))
    assert total_lines == sum(r["scan_count"] for r in manifest["routes"])
    for pair in manifest["pairs"]:
        assert pair["a"]["route"] == 0 and pair["b"]["route"] == 1
        assert pair["dv"] == pytest.approx(8.9)
        assert set(pair["gt"]) == {"theta", "x", "y"}


def test_generate_dataset_deterministic(tmp_path):
    generate_dataset(**dataset_args(tmp_path / "a"))
    generate_dataset(**dataset_args(tmp_path / "b"))
    for name in ["manifest.json", "scans_0.jsonl", "scans_1.jsonl", "poses_0.json", "poses_1.json"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_generate_dataset_max_pairs(tmp_path):
    manifest = generate_dataset(**dataset_args(tmp_path / "m", max_pairs=5))
    assert len(manifest["pairs"]) == 5


def test_doppler_off_dataset_needs_no_compensation(tmp_path):
    silent = NoiseSpec(range_param=0.0, angle_param=0.0, velocity_param=0.0, seed=1)
    manifest = generate_dataset(
        **dataset_args(tmp_path / "off", noise=silent, doppler_on=False)
    )
    params = RadarParams(beta=manifest["sensor"]["beta"])
    scans = read_scans_jsonl(tmp_path / "off" / manifest["routes"][0]["scans"])
    poses = json.loads((tmp_path / "off" / manifest["routes"][0]["poses"]).read_text())
    scene = dataset_args(tmp_path)["scene"]
    for scan, pose_row in zip(scans[:5], poses[:5]):
        pose = Pose.from_json(pose_row)
        for det in scan.detections:
            # compensation is a no-op on an undistorted noise-free scan only
            # if the velocity channel is silent; ranges are already true
            pos = transform_point(pose, polar_to_cartesian(det))
            dists = np.linalg.norm(scene.landmarks - pos[:2], axis=1)
            assert dists.min() < 1e-9


def test_body_velocity_along_heading():
    traj = generate_trajectory([(0.0, 0.0), (10.0, 10.0)], 5.0)
    v = body_velocity(traj, 0)
    assert np.allclose(v, [5.0, 0.0])
