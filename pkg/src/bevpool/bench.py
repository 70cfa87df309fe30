"""Timing harness: wall-clock medians per stage, CSV emission.

Monotonic wall clock around each stage, median over warm repetitions
after warmup runs. Ratios, not absolute numbers, carry the claims; the
reported GPU reference figures are printed for context only and never
asserted locally.
"""

from __future__ import annotations

import csv
import platform
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from ._threads import get_parallelism
from .bevgrid import build_cache
from .lift import normalize_depth
from .pooling import BACKENDS, Reducer, pool, reorder_weights
from .workload import WorkloadSpec, gen_workload

CSV_HEADER = ["backend", "n_points", "channels", "stage", "median_ms",
              "min_ms", "speedup_vs_baseline"]

#: reported on an RTX 3090 by the upstream system; context, not a target
PAPER_REFERENCE_LINES = [
    "grid association: 17 ms cold -> 4 ms with precomputed ranks",
    "feature aggregation: 500 ms prefix-sum -> 2 ms interval reduction",
    "end-to-end view transform: >500 ms -> 12 ms",
]

#: default resolution sweep (quarter / standard / quadruple point count)
SWEEP_RESOLUTIONS = ((16, 44), (32, 88), (64, 176))


@dataclass
class StageResult:
    stage: str
    backend: str
    n_points: int
    channels: int
    median_ms: float
    min_ms: float
    speedup_vs_baseline: float | None = None


@dataclass
class BenchReport:
    spec: WorkloadSpec
    stages: list[StageResult]
    reps: int
    warmups: int
    threads: int
    in_range_points: int
    n_intervals: int
    machine: str = field(default_factory=lambda: machine_note())


def machine_note() -> str:
    return (
        f"{platform.platform()} / python {platform.python_version()} / "
        f"numpy {np.__version__}"
    )


def time_stage(fn, reps: int, warmups: int) -> tuple[float, float]:
    """Median and min wall seconds of `fn()` over `reps` warm runs."""
    for _ in range(warmups):
        fn()
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times), min(times)


def run_bench(spec: WorkloadSpec, backends=BACKENDS,
              reducer: Reducer = Reducer.SUM, reps: int = 5,
              warmups: int = 2, include_association: bool = True) -> BenchReport:
    """Time cache building, cached association, and every backend."""
    if reps < 1:
        raise ValueError(f"repetitions must be >= 1, got {reps}")
    rig, features, logits, grid = gen_workload(spec)
    dist = normalize_depth(logits)
    cache = build_cache(rig, spec.frustum, grid)

    stages: list[StageResult] = []

    def add(stage, backend, fn, baseline_ms=None):
        med, best = time_stage(fn, reps, warmups)
        speedup = (baseline_ms / (med * 1e3)) if baseline_ms is not None else None
        stages.append(
            StageResult(stage, backend, spec.n_points, spec.channels,
                        med * 1e3, best * 1e3, speedup)
        )
        return med * 1e3

    if include_association:
        cold_ms = add("association_cold", "-",
                      lambda: build_cache(rig, spec.frustum, grid))
        stages[-1].speedup_vs_baseline = 1.0
        add("association_cached", "-",
            lambda: reorder_weights(dist, cache), baseline_ms=cold_ms)

    pool_ms = {}
    for backend in backends:
        pool_ms[backend] = add(
            "pool", backend,
            lambda b=backend: pool(features, dist, cache, grid, reducer, b),
        )
    baseline = pool_ms.get("prefixsum")
    for s in stages:
        if s.stage == "pool" and baseline is not None:
            s.speedup_vs_baseline = baseline / s.median_ms

    return BenchReport(
        spec=spec, stages=stages, reps=reps, warmups=warmups,
        threads=get_parallelism(), in_range_points=cache.n_in_range,
        n_intervals=cache.n_intervals,
    )


def run_sweep(base_spec: WorkloadSpec, resolutions=SWEEP_RESOLUTIONS,
              backends=BACKENDS, reducer: Reducer = Reducer.SUM,
              reps: int = 3, warmups: int = 1) -> list[StageResult]:
    """Pool-stage timings across feature-map resolutions (one row per
    backend per resolution)."""
    rows: list[StageResult] = []
    for height, width in resolutions:
        spec = base_spec.with_resolution(height, width)
        report = run_bench(spec, backends=backends, reducer=reducer,
                           reps=reps, warmups=warmups,
                           include_association=False)
        rows.extend(s for s in report.stages if s.stage == "pool")
    return rows


def format_report(report: BenchReport) -> str:
    spec = report.spec
    f = spec.frustum
    lines = [
        f"workload: N={spec.n_cameras} H={f.height} W={f.width} "
        f"D={f.depth_bins} C={spec.channels} seed={spec.seed}",
        f"grid: {spec.grid.nx}x{spec.grid.ny} @ r={spec.grid.r} m",
        f"points: {spec.n_points} total, {report.in_range_points} in range, "
        f"{report.n_intervals} intervals",
        f"timing: median of {report.reps} after {report.warmups} warmups, "
        f"{report.threads} worker thread(s)",
        f"machine: {report.machine}",
        "",
        f"{'stage':<20} {'backend':<10} {'median_ms':>10} {'min_ms':>10} "
        f"{'speedup':>8}",
    ]
    for s in report.stages:
        speedup = f"{s.speedup_vs_baseline:.2f}x" if s.speedup_vs_baseline else "-"
        lines.append(
            f"{s.stage:<20} {s.backend:<10} {s.median_ms:>10.3f} "
            f"{s.min_ms:>10.3f} {speedup:>8}"
        )
    lines.append("")
    lines.append("reference figures reported upstream on an RTX 3090 "
                 "(context only, not asserted here):")
    lines.extend(f"  {line}" for line in PAPER_REFERENCE_LINES)
    return "\n".join(lines)


def write_csv(path, rows: list[StageResult]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in rows:
            writer.writerow(
                [
                    s.backend,
                    s.n_points,
                    s.channels,
                    s.stage,
                    f"{s.median_ms:.6f}",
                    f"{s.min_ms:.6f}",
                    "" if s.speedup_vs_baseline is None
                    else f"{s.speedup_vs_baseline:.4f}",
                ]
            )
