"""Command-line entry points: gen-workload, verify, bench, pool, cache-build.

Exit codes: 0 success, 1 verification failure, 2 bad input or usage.
Parallelism is taken from BEVPOOL_THREADS (0 = one worker per CPU) and
pinned for the whole run.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from ._threads import set_parallelism
from .bench import (
    SWEEP_RESOLUTIONS,
    format_report,
    run_bench,
    run_sweep,
    write_csv,
)
from .bevgrid import (
    BevGridSpec,
    build_cache,
    load_cache,
    save_cache,
    validate_cache,
)
from .errors import BevPoolError, StaleCacheError
from .geometry import FrustumSpec, load_calibration, save_calibration
from .lift import normalize_depth
from .pooling import BACKENDS, Reducer, pool, pool_naive
from .tensorio import load_tensor, save_tensor
from .workload import WorkloadSpec, gen_workload, synthetic_rig

VERIFY_REL_TOL = 1e-4


def _add_workload_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cameras", type=int, default=6)
    p.add_argument("--height", type=int, default=32)
    p.add_argument("--width", type=int, default=88)
    p.add_argument("--depth-bins", type=int, default=118)
    p.add_argument("--depth-min", type=float, default=1.0)
    p.add_argument("--depth-step", type=float, default=0.5)
    p.add_argument("--channels", type=int, default=80)
    _add_grid_flags(p)


def _add_grid_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid-extent", type=float, default=51.2,
                   help="half extent E; the grid covers x,y in [-E, E)")
    p.add_argument("--cell-size", type=float, default=0.4)


def _grid_from_args(args) -> BevGridSpec:
    e = args.grid_extent
    return BevGridSpec(x_min=-e, x_max=e, y_min=-e, y_max=e,
                       z_min=-10.0, z_max=10.0, r=args.cell_size)


def _spec_from_args(args) -> WorkloadSpec:
    return WorkloadSpec(
        n_cameras=args.cameras,
        frustum=FrustumSpec(
            height=args.height, width=args.width, depth_min=args.depth_min,
            depth_step=args.depth_step, depth_bins=args.depth_bins,
        ),
        grid=_grid_from_args(args),
        channels=args.channels,
        seed=args.seed,
    )


def _cmd_gen_workload(args) -> int:
    spec = _spec_from_args(args)
    rig, features, logits, grid = gen_workload(spec)
    os.makedirs(args.out_dir, exist_ok=True)
    calib = os.path.join(args.out_dir, "calibration.json")
    save_calibration(calib, rig, spec.frustum)
    save_tensor(os.path.join(args.out_dir, "features.bvpt"), features)
    save_tensor(os.path.join(args.out_dir, "logits.bvpt"), logits)
    print(f"wrote {args.out_dir}: {spec.n_points} frustum points, "
          f"C={spec.channels}, seed={spec.seed}")
    return 0


def _deviation(reference: np.ndarray, candidate: np.ndarray):
    """Max absolute and relative deviation plus the worst cell index."""
    diff = np.abs(reference.astype(np.float64) - candidate.astype(np.float64))
    if diff.size == 0:
        return 0.0, 0.0, None
    rel = diff / np.maximum(1.0, np.abs(reference.astype(np.float64)))
    worst = np.unravel_index(int(np.argmax(rel)), rel.shape)
    return float(diff.max()), float(rel.max()), worst


def _cmd_verify(args) -> int:
    spec = _spec_from_args(args)
    rig, features, logits, grid = gen_workload(spec)
    dist = normalize_depth(logits)
    cache = build_cache(rig, spec.frustum, grid)
    reducer = Reducer.parse(args.reducer)
    reference = pool_naive(features, dist, cache, grid, reducer)
    ok = True
    for backend in ("prefixsum", "interval"):
        if backend == "prefixsum" and reducer is Reducer.MAX:
            print(f"{backend:<10} skipped (reducer max unsupported)")
            continue
        result = pool(features, dist, cache, grid, reducer, backend)
        values = result.values
        if args.corrupt_backend == backend and values.size:
            values = values.copy()
            values.flat[0] += 1.0 + abs(values.flat[0])
        max_abs, max_rel, worst = _deviation(reference.values, values)
        passed = max_rel <= VERIFY_REL_TOL
        ok = ok and passed
        status = "OK" if passed else "FAIL"
        print(f"{backend:<10} max_abs={max_abs:.3e} max_rel={max_rel:.3e} "
              f"{status}")
        if not passed and worst is not None:
            c, ix, iy = worst
            print(f"  worst cell: channel={c} ix={ix} iy={iy} "
                  f"naive={reference.values[worst]!r} "
                  f"{backend}={values[worst]!r}")
    print(f"verify: {'PASS' if ok else 'FAIL'} "
          f"(tolerance {VERIFY_REL_TOL:g} relative, reducer={reducer.value})")
    return 0 if ok else 1


def _cmd_bench(args) -> int:
    spec = _spec_from_args(args)
    backends = BACKENDS if args.backend == "all" else (args.backend,)
    reducer = Reducer.parse(args.reducer)
    if args.sweep:
        rows = run_sweep(spec, resolutions=SWEEP_RESOLUTIONS,
                         backends=backends, reducer=reducer,
                         reps=args.reps, warmups=args.warmups)
        for s in rows:
            print(f"{s.backend:<10} n_points={s.n_points:>9} "
                  f"median={s.median_ms:.3f} ms min={s.min_ms:.3f} ms")
        if args.csv:
            write_csv(args.csv, rows)
            print(f"wrote {args.csv}")
        return 0
    report = run_bench(spec, backends=backends, reducer=reducer,
                       reps=args.reps, warmups=args.warmups)
    print(format_report(report))
    if args.csv:
        write_csv(args.csv, report.stages)
        print(f"wrote {args.csv}")
    return 0


def _load_inputs(args):
    rig, frustum = load_calibration(args.calib)
    grid = _grid_from_args(args)
    return rig, frustum, grid


def _cmd_cache_build(args) -> int:
    rig, frustum, grid = _load_inputs(args)
    cache = build_cache(rig, frustum, grid)
    save_cache(args.out, cache)
    print(f"wrote {args.out}: {cache.n_in_range} in-range points, "
          f"{cache.n_intervals} intervals, fingerprint {cache.fingerprint:#018x}")
    return 0


def _cmd_pool(args) -> int:
    rig, frustum, grid = _load_inputs(args)
    features = load_tensor(args.features)
    logits = load_tensor(args.logits)
    if args.cache:
        cache = load_cache(args.cache)
        if not validate_cache(cache, rig, frustum, grid):
            raise StaleCacheError(
                f"cache {args.cache} does not match this calibration/grid "
                f"(stale fingerprint)"
            )
    else:
        cache = build_cache(rig, frustum, grid)
    dist = normalize_depth(logits)
    result = pool(features, dist, cache, grid,
                  Reducer.parse(args.reducer), args.backend)
    save_tensor(args.out, result.values)
    print(f"wrote {args.out}: shape {result.values.shape}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bevpool",
        description="camera-to-BEV pooling benchmark and file-level tools",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-workload", help="write a synthetic workload to disk")
    _add_workload_flags(p)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_gen_workload)

    p = sub.add_parser("verify", help="compare every backend against the oracle")
    _add_workload_flags(p)
    p.add_argument("--reducer", default="sum")
    p.add_argument("--corrupt-backend", choices=BACKENDS, default=None,
                   help="perturb one backend's output (tests the tester)")
    p.set_defaults(fn=_cmd_verify)

    p = sub.add_parser("bench", help="time association and pooling stages")
    _add_workload_flags(p)
    p.add_argument("--backend", choices=BACKENDS + ("all",), default="all")
    p.add_argument("--reducer", default="sum")
    p.add_argument("--reps", type=int, default=5)
    p.add_argument("--warmups", type=int, default=2)
    p.add_argument("--csv", default=None)
    p.add_argument("--sweep", action="store_true",
                   help="sweep feature resolutions instead of one workload")
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("cache-build", help="precompute the association cache")
    p.add_argument("--calib", required=True)
    _add_grid_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_cache_build)

    p = sub.add_parser("pool", help="pool tensor files into a BEV map file")
    p.add_argument("--calib", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--logits", required=True)
    p.add_argument("--cache", default=None)
    _add_grid_flags(p)
    p.add_argument("--backend", choices=BACKENDS, default="interval")
    p.add_argument("--reducer", default="sum")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_pool)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        set_parallelism()
        return args.fn(args)
    except BevPoolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
