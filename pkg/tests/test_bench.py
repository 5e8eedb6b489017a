import math
from pathlib import Path

import numpy as np
import pytest

from radarloc.bench import (
    MethodConfig,
    PairResult,
    aggregate,
    bin_by_velocity_diff,
    evaluate_pair,
    run_ablation,
    run_benchmark,
)
from radarloc.errors import AllOutliersError
from radarloc.geometry import Pose
from radarloc.registration import RegistrationResult
from radarloc.simulator import NoiseSpec, RouteSpec, SensorSpec, generate_dataset, generate_scene


def reg(theta=0.0, x=0.0, y=0.0):
    return RegistrationResult(Pose(theta, x, y), 1, 0.0, True, 10)


def pr(pair_id, method, trans, rot=0.0, dv=0.0):
    return PairResult(pair_id, method, trans, rot, dv, True, 0.0)


# --- evaluate_pair ---

def test_evaluate_exact_match():
    gt = Pose(0.3, 1.0, 2.0)
    assert evaluate_pair(reg(0.3, 1.0, 2.0), gt) == (0.0, 0.0)


def test_evaluate_three_four_five():
    trans, rot = evaluate_pair(reg(0.1, 4.0, 5.0), Pose(0.1, 1.0, 1.0))
    assert trans == pytest.approx(5.0)
    assert rot == 0.0


def test_evaluate_wraps_rotation():
    trans, rot = evaluate_pair(reg(0.2 + 2 * math.pi), Pose(0.2))
    assert rot == pytest.approx(0.0, abs=1e-12)
    assert 0.0 <= rot <= math.pi


# --- aggregate ---

def test_aggregate_basic_stats():
    rows = [pr(0, "mle", 0.1), pr(1, "mle", 0.2), pr(2, "mle", 0.3)]
    out = aggregate(rows, 2.0)
    stats = out["mle"]["translation_m"]
    assert stats["mean"] == pytest.approx(0.2)
    assert stats["max"] == pytest.approx(0.3)
    assert stats["median"] == pytest.approx(0.2)
    assert out["mle"]["inliers"] == 3


def test_aggregate_excludes_outliers():
    rows = [pr(0, "mle", 0.1), pr(1, "mle", 5.0)]
    out = aggregate(rows, 2.0)
    assert out["mle"]["inliers"] == 1
    assert out["mle"]["translation_m"]["mean"] == pytest.approx(0.1)


def test_aggregate_joint_inlier_intersection():
    rows = []
    for pid in (1, 2, 3):
        rows.append(pr(pid, "a", 0.1))
    rows.append(pr(4, "a", 9.0))
    for pid in (2, 3, 4):
        rows.append(pr(pid, "b", 0.2))
    rows.append(pr(1, "b", 9.0))
    out = aggregate(rows, 2.0)
    assert out["a"]["inliers"] == 2  # pairs {2, 3}
    assert out["b"]["inliers"] == 2


def test_aggregate_all_outliers():
    with pytest.raises(AllOutliersError):
        aggregate([pr(0, "a", 5.0), pr(0, "b", 0.1)], 2.0)


def test_aggregate_permutation_invariant():
    rng = np.random.default_rng(1)
    rows = [pr(i, m, float(rng.uniform(0, 3))) for i in range(20) for m in ("a", "b")]
    fwd = aggregate(rows, 2.0)
    rev = aggregate(rows[::-1], 2.0)
    assert fwd == rev


def test_joint_inliers_monotone_under_added_method():
    rows = [pr(i, "a", 0.1) for i in range(5)]
    base = aggregate(rows, 2.0)["a"]["inliers"]
    rows += [pr(i, "b", 0.1 if i < 3 else 5.0) for i in range(5)]
    joined = aggregate(rows, 2.0)["a"]["inliers"]
    assert joined <= base


# --- velocity binning ---

def test_bins_single_when_all_zero():
    rows = [pr(i, "a", 0.1, dv=0.0) for i in range(4)]
    bins = bin_by_velocity_diff(rows, 1.0)["a"]
    assert len(bins) == 1
    assert bins[0]["count"] == 4


def test_bins_split_by_width():
    rows = [pr(0, "a", 0.1, dv=0.5), pr(1, "a", 0.3, dv=1.5)]
    bins = bin_by_velocity_diff(rows, 1.0)["a"]
    assert [b["count"] for b in bins] == [1, 1]
    assert bins[0]["mean_trans"] == pytest.approx(0.1)
    assert bins[1]["mean_trans"] == pytest.approx(0.3)


def test_empty_bins_reported_empty():
    rows = [pr(0, "a", 0.1, dv=0.5), pr(1, "a", 0.3, dv=2.5)]
    bins = bin_by_velocity_diff(rows, 1.0)["a"]
    assert bins[1]["count"] == 0
    assert bins[1]["mean_trans"] is None


# --- method configs ---

def test_method_config_flags():
    assert MethodConfig.from_name("mle").doppler_compensation
    assert not MethodConfig.from_name("mle_no_dc").doppler_compensation
    assert MethodConfig.from_name("mle_no_dc").uncertainty_weighting
    with pytest.raises(ValueError):
        MethodConfig.from_name("magic")
    with pytest.raises(ValueError):
        MethodConfig(method="mle", doppler_compensation=False, uncertainty_weighting=True)


# --- end-to-end benchmark on tiny datasets ---

def tiny_dataset(out_dir, noise=None, doppler_on=True, speeds=(20.0, 11.1)):
    scene = generate_scene(220, 110.0, seed=14)
    routes = [
        RouteSpec(waypoints=((-35.0, 0.0), (35.0, 0.0)), speed=s) for s in speeds
    ]
    return generate_dataset(
        scene=scene,
        routes=routes,
        spec=SensorSpec(),
        noise=noise if noise is not None else NoiseSpec(seed=5),
        doppler_on=doppler_on,
        out_dir=out_dir,
        max_pairs=12,
    )


def test_benchmark_exact_recovery_on_clean_dataset(tmp_path):
    # doppler off with matched speeds: compensation warps both submaps of a
    # pair identically, so the full pipeline still recovers exactly
    silent = NoiseSpec(range_param=0.0, angle_param=0.0, velocity_param=0.0, seed=1)
    tiny_dataset(tmp_path, noise=silent, doppler_on=False, speeds=(15.0, 15.0))
    report = run_benchmark(tmp_path / "manifest.json", ["mle"], seed=0)
    stats = report["summary"]["mle"]["translation_m"]
    assert stats["mean"] <= 1e-4


def test_benchmark_exact_recovery_on_distorted_clean_dataset(tmp_path):
    # doppler on, zero noise, different speeds: compensation inverts the
    # distortion exactly, so recovery is still exact with nontrivial pairs
    silent = NoiseSpec(range_param=0.0, angle_param=0.0, velocity_param=0.0, seed=1)
    tiny_dataset(tmp_path, noise=silent, doppler_on=True)
    report = run_benchmark(tmp_path / "manifest.json", ["mle"], seed=0)
    stats = report["summary"]["mle"]["translation_m"]
    assert stats["mean"] <= 1e-4


def test_benchmark_mle_beats_icp_on_distorted_data(tmp_path):
    tiny_dataset(tmp_path)
    report = run_benchmark(tmp_path / "manifest.json", ["mle", "icp"], seed=0)
    summary = report["summary"]
    assert summary["mle"]["translation_m"]["mean"] < summary["icp"]["translation_m"]["mean"]


def test_benchmark_row_count_and_csv(tmp_path):
    manifest = tiny_dataset(tmp_path / "data")
    out = tmp_path / "report"
    report = run_benchmark(
        (tmp_path / "data" / "manifest.json"), ["mle", "mle_no_dc"], seed=3, out_dir=out
    )
    assert len(report["results"]) == len(manifest["pairs"]) * 2
    lines = (out / "pairs.csv").read_text().strip().split("\n")
    assert lines[0] == "pair_id,method,dv_mps,trans_err_m,rot_err_rad,converged,runtime_s"
    assert len(lines) == 1 + len(report["results"])
    summary_lines = (out / "summary.csv").read_text().strip().split("\n")
    assert summary_lines[0] == "method,metric,mean,max,median,inliers"
    assert len(summary_lines) == 1 + 2 * 2


def test_benchmark_deterministic_bytes(tmp_path):
    tiny_dataset(tmp_path / "data")
    manifest = tmp_path / "data" / "manifest.json"
    run_benchmark(manifest, ["mle", "icp"], seed=9, out_dir=tmp_path / "r1")
    run_benchmark(manifest, ["mle", "icp"], seed=9, out_dir=tmp_path / "r2")
    assert (tmp_path / "r1" / "pairs.csv").read_bytes() == (tmp_path / "r2" / "pairs.csv").read_bytes()
    assert (tmp_path / "r1" / "summary.csv").read_bytes() == (tmp_path / "r2" / "summary.csv").read_bytes()


def test_benchmark_parallel_matches_serial(tmp_path):
    tiny_dataset(tmp_path / "data")
    manifest = tmp_path / "data" / "manifest.json"
    run_benchmark(manifest, ["mle"], seed=2, out_dir=tmp_path / "serial", jobs=1)
    run_benchmark(manifest, ["mle"], seed=2, out_dir=tmp_path / "par", jobs=4)
    assert (tmp_path / "serial" / "pairs.csv").read_bytes() == (tmp_path / "par" / "pairs.csv").read_bytes()


def test_ablation_grid_on_clean_dataset(tmp_path):
    silent = NoiseSpec(range_param=0.0, angle_param=0.0, velocity_param=0.0, seed=1)
    tiny_dataset(tmp_path / "data", noise=silent, doppler_on=False, speeds=(15.0, 15.0))
    out = tmp_path / "report"
    report = run_ablation(tmp_path / "data" / "manifest.json", seed=0, out_dir=out)
    rows = report["ablation"]
    assert [(r["ue"], r["dc"]) for r in rows] == [
        (False, False), (True, False), (False, True), (True, True),
    ]
    # without distortion or noise the component switches are no-ops
    means = [r["trans"]["mean"] for r in rows]
    assert max(means) - min(means) < 1e-4
    header = (out / "ablation.csv").read_text().split("\n")[0]
    assert header == (
        "ue,dc,trans_mean_m,trans_max_m,trans_median_m,"
        "rot_mean_rad,rot_max_rad,rot_median_rad,inliers"
    )


def test_ablation_compensation_helps_on_distorted_data(tmp_path):
    tiny_dataset(tmp_path / "data")
    report = run_ablation(tmp_path / "data" / "manifest.json", seed=0)
    summary = report["summary"]
    assert (
        summary["mle"]["translation_m"]["mean"]
        < summary["mle_no_dc"]["translation_m"]["mean"]
    )
    assert (
        summary["mle_no_ue"]["translation_m"]["mean"]
        < summary["mle_neither"]["translation_m"]["mean"]
    )
