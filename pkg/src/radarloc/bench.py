"""Benchmark harness: run methods over loop pairs and report error metrics.

Protocol: per pair and method, build both submaps with the method's
component flags, describe, match, verify with RANSAC, register from the
coarse transform, and score against ground truth. Pairs whose translation
error reaches the inlier threshold are excluded before statistics, and when
several methods are aggregated together only pairs that are inliers for
every method are kept, so all methods are scored on the same set.

Per-pair failures are recorded as non-converged results with infinite
error; they never abort a run.
"""

from __future__ import annotations

import concurrent.futures
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .association import RansacConfig, match_descriptors, ransac_rigid
from .doppler import RadarParams, Scan, read_scans_jsonl
from .errors import AllOutliersError, RadarLocError
from .geometry import Pose, wrap_angle
from .registration import (
    RegistrationResult,
    SolverConfig,
    egomotion_compensated_register,
    icp_register,
    ndt_register,
    register,
    register_unweighted,
)
from .submap import DescriptorConfig, Submap, build_submap, describe
from .uncertainty import PolarNoise

import json

METHOD_FLAGS = {
    "mle": (True, True),
    "mle_no_dc": (False, True),
    "mle_no_ue": (True, False),
    "mle_neither": (False, False),
    "icp": (False, False),
    "ndt": (False, False),
    "egomotion": (False, False),
}

ABLATION_METHODS = ("mle_neither", "mle_no_dc", "mle_no_ue", "mle")

PAIR_CSV_HEADER = "pair_id,method,dv_mps,trans_err_m,rot_err_rad,converged,runtime_s"
SUMMARY_CSV_HEADER = "method,metric,mean,max,median,inliers"


@dataclass(frozen=True)
class MethodConfig:
    """A benchmarked method plus its component switches."""

    method: str
    doppler_compensation: bool
    uncertainty_weighting: bool

    def __post_init__(self):
        if self.method not in METHOD_FLAGS:
            raise ValueError(f"unknown method {self.method!r}")
        if (self.doppler_compensation, self.uncertainty_weighting) != METHOD_FLAGS[self.method]:
            raise ValueError(f"flags inconsistent with method {self.method!r}")

    @classmethod
    def from_name(cls, name: str) -> "MethodConfig":
        if name not in METHOD_FLAGS:
            raise ValueError(f"unknown method {name!r}")
        dc, ue = METHOD_FLAGS[name]
        return cls(method=name, doppler_compensation=dc, uncertainty_weighting=ue)


@dataclass(frozen=True)
class PairResult:
    pair_id: int
    method: str
    translation_error: float
    rotation_error: float
    velocity_diff: float
    converged: bool
    runtime: float


def evaluate_pair(result: RegistrationResult, gt: Pose) -> tuple[float, float]:
    """Translation / rotation error of an estimate against ground truth."""
    trans = math.hypot(result.transform.x - gt.x, result.transform.y - gt.y)
    rot = abs(wrap_angle(result.transform.theta - gt.theta))
    return trans, rot


def aggregate(results: Sequence[PairResult], inlier_threshold: float = 2.0) -> dict:
    """Joint-inlier statistics per method.

    A pair counts only if its translation error is below the threshold for
    every method present in ``results``.
    """
    if not results:
        raise ValueError("no results to aggregate")
    # fixed evaluation order keeps the statistics permutation-invariant
    results = sorted(results, key=lambda r: (r.pair_id, r.method))
    methods = sorted({r.method for r in results})
    inlier_ids = None
    for m in methods:
        ids = {r.pair_id for r in results if r.method == m and r.translation_error < inlier_threshold}
        inlier_ids = ids if inlier_ids is None else (inlier_ids & ids)
    if not inlier_ids:
        raise AllOutliersError("no pair is an inlier for every method")

    summary = {}
    for m in methods:
        rows = [r for r in results if r.method == m and r.pair_id in inlier_ids]
        trans = np.array([r.translation_error for r in rows])
        rot = np.array([r.rotation_error for r in rows])
        summary[m] = {
            "translation_m": {
                "mean": float(trans.mean()),
                "max": float(trans.max()),
                "median": float(np.median(trans)),
            },
            "rotation_rad": {
                "mean": float(rot.mean()),
                "max": float(rot.max()),
                "median": float(np.median(rot)),
            },
            "inliers": len(rows),
        }
    return summary


def bin_by_velocity_diff(results: Sequence[PairResult], bin_width: float = 1.0) -> dict:
    """Mean errors per velocity-difference bin [k*w, (k+1)*w), per method.

    Empty bins carry count 0 and None means; they are reported, not
    zero-filled. Callers wanting inlier filtering apply it before binning
    (this harness filters globally, not per bin).
    """
    if not results:
        raise ValueError("no results to bin")
    if bin_width <= 0:
        raise ValueError("bin_width must be positive")
    results = sorted(results, key=lambda r: (r.pair_id, r.method))
    top = max(r.velocity_diff for r in results)
    n_bins = int(math.floor(top / bin_width)) + 1
    out: dict[str, list[dict]] = {}
    for m in sorted({r.method for r in results}):
        bins = []
        for k in range(n_bins):
            lo, hi = k * bin_width, (k + 1) * bin_width
            rows = [
                r for r in results
                if r.method == m and lo <= r.velocity_diff < hi
                and math.isfinite(r.translation_error)
            ]
            bins.append(
                {
                    "bin": k,
                    "lo": lo,
                    "hi": hi,
                    "count": len(rows),
                    "mean_trans": float(np.mean([r.translation_error for r in rows])) if rows else None,
                    "mean_rot": float(np.mean([r.rotation_error for r in rows])) if rows else None,
                }
            )
        out[m] = bins
    return out


class Dataset:
    """Loads a simulator manifest plus its scan and pose files."""

    def __init__(self, manifest_path: str | Path):
        self.root = Path(manifest_path).parent
        with open(manifest_path) as fh:
            self.manifest = json.load(fh)
        self.params = RadarParams(beta=float(self.manifest["sensor"]["beta"]))
        self._scans: dict[int, list[Scan]] = {}
        self._poses: dict[int, list[Pose]] = {}
        self._speeds: dict[int, list[float]] = {}
        self._submaps: dict[tuple, Submap] = {}

    @property
    def pairs(self) -> list[dict]:
        return self.manifest["pairs"]

    def noise_model(self) -> PolarNoise:
        """Measurement-noise model for covariance propagation.

        Mirrors the dataset's noise parameters; a fully silent dataset falls
        back to the standard sensor model, since zero sigmas would make
        every propagated covariance singular.
        """
        n = self.manifest["noise"]
        if n["range_param"] == 0 and n["angle_param"] == 0 and n["velocity_param"] == 0:
            return PolarNoise()
        return PolarNoise(
            sigma_r=float(n["range_param"]) or 1e-3,
            sigma_v=float(n["velocity_param"]) or 1e-3,
            sigma_phi=float(n["angle_param"]) or 1e-4,
        )

    def _load_route(self, route: int) -> None:
        if route in self._scans:
            return
        entry = self.manifest["routes"][route]
        self._scans[route] = read_scans_jsonl(self.root / entry["scans"])
        with open(self.root / entry["poses"]) as fh:
            rows = json.load(fh)
        self._poses[route] = [Pose.from_json(r) for r in rows]
        self._speeds[route] = [float(r["speed"]) for r in rows]

    def submap(self, side: dict, compensation_on: bool, described: bool,
               descriptor_config: DescriptorConfig) -> Submap:
        """Build (and cache) one side of a pair.

        Relative scan poses come from the ground-truth odometry shipped with
        the dataset; the anchor is the first scan's pose.
        """
        route, start, count = side["route"], side["start"], side["count"]
        key = (route, start, count, compensation_on, described, descriptor_config)
        if key in self._submaps:
            return self._submaps[key]
        self._load_route(route)
        anchor = self._poses[route][start]
        anchor_inv = anchor.inverse()
        scans = [
            (self._scans[route][k], anchor_inv.compose(self._poses[route][k]))
            for k in range(start, start + count)
        ]
        sub = build_submap(
            scans,
            self.params,
            compensation_on=compensation_on,
            noise=self.noise_model(),
            anchor_pose=anchor,
            keep_source=not compensation_on,
        )
        if described:
            sub = describe(sub, descriptor_config)
        self._submaps[key] = sub
        return sub


def localize_pair(
    dataset: Dataset,
    pair_id: int,
    mconf: MethodConfig,
    solver: SolverConfig = SolverConfig(),
    descriptor_config: DescriptorConfig = DescriptorConfig(),
    ransac_config: RansacConfig = RansacConfig(),
    seed: int = 0,
) -> RegistrationResult:
    """Run one method on one loop pair and return the estimated transform.

    The RANSAC coarse transform initializes every method; when association
    fails the solver starts from identity over the raw mutual matches.
    """
    pair = dataset.pairs[pair_id]
    cur = dataset.submap(pair["a"], mconf.doppler_compensation, True, descriptor_config)
    prev = dataset.submap(pair["b"], mconf.doppler_compensation, True, descriptor_config)
    pair_seed = int(np.random.SeedSequence((seed, pair_id)).generate_state(1)[0])
    rcfg = RansacConfig(
        iterations=ransac_config.iterations,
        inlier_threshold=ransac_config.inlier_threshold,
        min_inliers=ransac_config.min_inliers,
        seed=pair_seed,
    )
    cands = match_descriptors(cur, prev)
    try:
        inliers, coarse = ransac_rigid(cands, cur, prev, rcfg)
        if len(inliers) < 3:
            inliers, coarse = cands, Pose.identity()
    except RadarLocError:
        inliers, coarse = cands, Pose.identity()

    if mconf.method == "icp":
        return icp_register(cur, prev, coarse, solver)
    if mconf.method == "ndt":
        return ndt_register(cur, prev, coarse, solver)
    if mconf.method == "egomotion":
        return egomotion_compensated_register(
            cur, prev, coarse, solver, dataset.params, descriptor_config, rcfg
        )
    if mconf.uncertainty_weighting:
        return register(cur, prev, inliers, coarse, solver)
    return register_unweighted(cur, prev, inliers, coarse, solver)


def _run_one(
    dataset: Dataset,
    pair_id: int,
    pair: dict,
    mconf: MethodConfig,
    solver: SolverConfig,
    descriptor_config: DescriptorConfig,
    ransac_config: RansacConfig,
    seed: int,
) -> PairResult:
    started = time.perf_counter()
    gt = Pose.from_json(pair["gt"])
    dv = float(pair["dv"])
    try:
        result = localize_pair(
            dataset, pair_id, mconf, solver, descriptor_config, ransac_config, seed
        )
        trans, rot = evaluate_pair(result, gt)
        return PairResult(
            pair_id, mconf.method, trans, rot, dv, result.converged,
            time.perf_counter() - started,
        )
    except (RadarLocError, ValueError):
        return PairResult(
            pair_id, mconf.method, math.inf, math.inf, dv, False,
            time.perf_counter() - started,
        )


def _fmt(value: float) -> str:
    if value != value or value in (math.inf, -math.inf):
        return "inf"
    return f"{value:.9g}"


def write_pair_csv(path: Path, results: Sequence[PairResult], record_runtime: bool) -> None:
    rows = sorted(results, key=lambda r: (r.pair_id, r.method))
    with open(path, "w") as fh:
        fh.write(PAIR_CSV_HEADER + "\n")
        for r in rows:
            runtime = r.runtime if record_runtime else 0.0
            fh.write(
                f"{r.pair_id},{r.method},{_fmt(r.velocity_diff)},{_fmt(r.translation_error)},"
                f"{_fmt(r.rotation_error)},{str(r.converged).lower()},{_fmt(runtime)}\n"
            )


def write_summary_csv(path: Path, summary: dict) -> None:
    with open(path, "w") as fh:
        fh.write(SUMMARY_CSV_HEADER + "\n")
        for method in sorted(summary):
            for metric in ("translation_m", "rotation_rad"):
                stats = summary[method][metric]
                fh.write(
                    f"{method},{metric},{_fmt(stats['mean'])},{_fmt(stats['max'])},"
                    f"{_fmt(stats['median'])},{summary[method]['inliers']}\n"
                )


def run_benchmark(
    manifest_path: str | Path,
    methods: Sequence[MethodConfig | str],
    seed: int = 0,
    out_dir: Optional[str | Path] = None,
    inlier_threshold: float = 2.0,
    bin_width: float = 1.0,
    solver: SolverConfig = SolverConfig(),
    descriptor_config: DescriptorConfig = DescriptorConfig(),
    ransac_config: RansacConfig = RansacConfig(),
    jobs: int = 1,
    record_runtime: bool = False,
) -> dict:
    """Evaluate every (pair, method) combination of a dataset.

    Returns a report with per-pair results, joint-inlier summary, and
    velocity-difference bins; optionally writes pairs.csv and summary.csv.
    Output is deterministic for fixed (dataset, configs, seed): rows are
    sorted and, unless ``record_runtime`` is set, the runtime column is
    zeroed so reruns are byte-identical.
    """
    dataset = Dataset(manifest_path)
    configs = [m if isinstance(m, MethodConfig) else MethodConfig.from_name(m) for m in methods]
    if not configs:
        raise ValueError("no methods requested")

    tasks = [
        (pair_id, pair, mconf)
        for pair_id, pair in enumerate(dataset.pairs)
        for mconf in configs
    ]

    def job(task):
        pair_id, pair, mconf = task
        return _run_one(
            dataset, pair_id, pair, mconf, solver, descriptor_config, ransac_config, seed
        )

    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(job, tasks))
    else:
        results = [job(t) for t in tasks]
    results.sort(key=lambda r: (r.pair_id, r.method))

    summary = aggregate(results, inlier_threshold)
    inlier_ids = _joint_inlier_ids(results, inlier_threshold)
    bins = bin_by_velocity_diff(
        [r for r in results if r.pair_id in inlier_ids], bin_width
    )
    report = {
        "results": results,
        "summary": summary,
        "bins": bins,
        "inlier_threshold": inlier_threshold,
        "pair_count": len(dataset.pairs),
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_pair_csv(out / "pairs.csv", results, record_runtime)
        write_summary_csv(out / "summary.csv", summary)
        report["pair_csv"] = str(out / "pairs.csv")
        report["summary_csv"] = str(out / "summary.csv")
    return report


def _joint_inlier_ids(results: Sequence[PairResult], threshold: float) -> set[int]:
    ids = None
    for m in {r.method for r in results}:
        mids = {r.pair_id for r in results if r.method == m and r.translation_error < threshold}
        ids = mids if ids is None else ids & mids
    return ids or set()


def run_ablation(
    manifest_path: str | Path,
    seed: int = 0,
    out_dir: Optional[str | Path] = None,
    **kwargs,
) -> dict:
    """Component-switch grid: both flags off, each alone, both on.

    Adds an ablation.csv shaped like the component table (one row per
    flag combination) on top of the standard benchmark outputs.
    """
    report = run_benchmark(manifest_path, ABLATION_METHODS, seed, out_dir, **kwargs)
    rows = []
    for name in ABLATION_METHODS:
        dc, ue = METHOD_FLAGS[name]
        stats = report["summary"][name]
        rows.append(
            {
                "ue": ue,
                "dc": dc,
                "trans": stats["translation_m"],
                "rot": stats["rotation_rad"],
                "inliers": stats["inliers"],
            }
        )
    report["ablation"] = rows
    if out_dir is not None:
        path = Path(out_dir) / "ablation.csv"
        with open(path, "w") as fh:
            fh.write(
                "ue,dc,trans_mean_m,trans_max_m,trans_median_m,"
                "rot_mean_rad,rot_max_rad,rot_median_rad,inliers\n"
            )
            for row in rows:
                fh.write(
                    f"{int(row['ue'])},{int(row['dc'])},"
                    f"{_fmt(row['trans']['mean'])},{_fmt(row['trans']['max'])},"
                    f"{_fmt(row['trans']['median'])},{_fmt(row['rot']['mean'])},"
                    f"{_fmt(row['rot']['max'])},{_fmt(row['rot']['median'])},"
                    f"{row['inliers']}\n"
                )
        report["ablation_csv"] = str(path)
    return report
