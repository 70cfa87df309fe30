import numpy as np
import pytest

import bevpool as bp
from bevpool.bevgrid import ranks_and_intervals
from bevpool.errors import (
    ConfigurationError,
    StaleCacheError,
    UnsupportedReducerError,
    ValidationError,
)

from conftest import max_rel_dev, random_instance

REL_TOL = 1e-4


def pool_scalar_oracle(features, dist, cells, grid, reducer):
    """Dict-based scalar reference, independent of every backend."""
    n_, c_, h_, w_ = features.shape
    d_ = dist.shape[1]
    buckets = {}
    i = 0
    for n in range(n_):
        for h in range(h_):
            for w in range(w_):
                for d in range(d_):
                    cell = int(cells[i])
                    if cell != bp.OUT_OF_RANGE:
                        weight = float(dist[n, d, h, w])
                        values = [
                            weight * float(features[n, c, h, w]) for c in range(c_)
                        ]
                        buckets.setdefault(cell, []).append(values)
                    i += 1
    out = np.zeros((c_, grid.n_cells))
    for cell, rows in buckets.items():
        arr = np.array(rows)
        if reducer is bp.Reducer.SUM:
            out[:, cell] = arr.sum(axis=0)
        elif reducer is bp.Reducer.MEAN:
            out[:, cell] = arr.mean(axis=0)
        else:
            out[:, cell] = arr.max(axis=0)
    return out.reshape(c_, grid.nx, grid.ny).astype(np.float32)


def synthetic_cache(cells, n_cameras, frustum, grid):
    ranks, starts, cell_ids = ranks_and_intervals(cells)
    return bp.AssociationCache(
        cell_of_point=cells,
        ranks=ranks,
        interval_starts=starts,
        interval_cells=cell_ids,
        fingerprint=0,
        n_cameras=n_cameras,
        frustum=frustum,
        grid=grid,
    )


def worked_example():
    """One camera, one row of four pixels, one depth bin, cells [2, 0, 2, 1]."""
    frustum = bp.FrustumSpec(1, 4, depth_min=1.0, depth_step=1.0, depth_bins=1)
    grid = bp.BevGridSpec(0.0, 1.2, 0.0, 0.4, -1, 1, r=0.4)  # 3 x 1 cells
    cells = np.array([2, 0, 2, 1], dtype=np.uint32)
    cache = synthetic_cache(cells, 1, frustum, grid)
    features = np.array([1, 2, 3, 4], dtype=np.float32).reshape(1, 1, 1, 4)
    dist = np.ones((1, 1, 1, 4), dtype=np.float32)  # D=1: unit weights
    return features, dist, cache, grid


@pytest.mark.parametrize("backend", bp.BACKENDS)
def test_worked_example_sum(backend):
    features, dist, cache, grid = worked_example()
    out = bp.pool(features, dist, cache, grid, bp.Reducer.SUM, backend)
    np.testing.assert_allclose(out.values.reshape(3), [2.0, 4.0, 4.0], atol=0)


@pytest.mark.parametrize("backend", bp.BACKENDS)
def test_worked_example_mean(backend):
    features, dist, cache, grid = worked_example()
    out = bp.pool(features, dist, cache, grid, bp.Reducer.MEAN, backend)
    np.testing.assert_allclose(out.values.reshape(3), [2.0, 4.0, 2.0], atol=0)


@pytest.mark.parametrize("backend", ["naive", "interval"])
def test_worked_example_max(backend):
    features, dist, cache, grid = worked_example()
    out = bp.pool(features, dist, cache, grid, bp.Reducer.MAX, backend)
    np.testing.assert_allclose(out.values.reshape(3), [2.0, 4.0, 3.0], atol=0)


def test_prefixsum_running_sum_by_hand():
    # sorted values [2, 4, 1, 3]; running sum [2, 6, 7, 10]; boundary
    # subtraction at interval ends 0, 1, 3 gives 2, 4, 4
    features, dist, cache, grid = worked_example()
    sorted_vals = features.reshape(-1)[cache.ranks]
    np.testing.assert_array_equal(sorted_vals, [2, 4, 1, 3])
    running = np.cumsum(sorted_vals)
    np.testing.assert_array_equal(running, [2, 6, 7, 10])
    out = bp.pool_prefixsum(features, dist, cache, grid, bp.Reducer.SUM)
    np.testing.assert_allclose(out.values.reshape(3), [2.0, 4.0, 4.0], atol=0)


def test_naive_matches_scalar_oracle_on_random_instances():
    for seed in range(8):
        rig, frustum, grid, features, dist, cache = random_instance(
            seed, max_hw=6, max_d=4, max_c=3
        )
        for reducer in bp.Reducer:
            got = bp.pool_naive(features, dist, cache, grid, reducer)
            want = pool_scalar_oracle(
                features, dist, cache.cell_of_point, grid, reducer
            )
            assert max_rel_dev(want, got.values) < 1e-6


@pytest.mark.parametrize("reducer", [bp.Reducer.SUM, bp.Reducer.MEAN])
def test_backends_agree_with_oracle(reducer):
    for seed in range(12):
        rig, frustum, grid, features, dist, cache = random_instance(100 + seed)
        reference = bp.pool_naive(features, dist, cache, grid, reducer)
        for backend in ("prefixsum", "interval"):
            got = bp.pool(features, dist, cache, grid, reducer, backend)
            assert max_rel_dev(reference.values, got.values) < REL_TOL, (
                f"seed={seed} backend={backend}"
            )


def test_interval_max_agrees_with_oracle():
    for seed in range(6):
        rig, frustum, grid, features, dist, cache = random_instance(300 + seed)
        reference = bp.pool_naive(features, dist, cache, grid, bp.Reducer.MAX)
        got = bp.pool_interval(features, dist, cache, grid, bp.Reducer.MAX)
        assert max_rel_dev(reference.values, got.values) < REL_TOL


def test_one_hot_distribution_places_full_feature():
    # single camera looking straight down one cell column (see bevgrid
    # tests); with a one-hot depth the pixel's feature lands once, intact
    rotation = np.column_stack(
        [[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]
    )
    cam = bp.CameraCalibration(
        fx=1, fy=1, cx=0, cy=0, rotation=rotation,
        translation=np.array([0.2, 0.2, 4.0]),
    )
    frustum = bp.FrustumSpec(1, 1, depth_min=0.5, depth_step=0.5, depth_bins=6)
    grid = bp.BevGridSpec(-2, 2, -2, 2, -5, 5, r=0.4)
    cache = bp.build_cache([cam], frustum, grid)
    features = np.full((1, 3, 1, 1), 7.5, dtype=np.float32)
    dist = np.zeros((1, 6, 1, 1), dtype=np.float32)
    dist[0, 2, 0, 0] = 1.0
    for backend in bp.BACKENDS:
        out = bp.pool(features, dist, cache, grid, bp.Reducer.SUM, backend)
        cell = int(cache.interval_cells[0])
        flat = out.values.reshape(3, -1)
        np.testing.assert_allclose(flat[:, cell], 7.5, atol=1e-6)
        assert np.count_nonzero(flat) == 3


@pytest.mark.parametrize("backend", bp.BACKENDS)
def test_zero_weights_give_zero_map(backend):
    features, dist, cache, grid = worked_example()
    # D=1 normally forces weight 1; zero them explicitly
    out = bp.pool(features, np.zeros_like(dist), cache, grid,
                  bp.Reducer.SUM, backend)
    assert not out.values.any()


@pytest.mark.parametrize("backend", bp.BACKENDS)
def test_empty_ranks_give_zero_map(backend):
    frustum = bp.FrustumSpec(1, 4, 1.0, 1.0, 1)
    grid = bp.BevGridSpec(0.0, 1.2, 0.0, 0.4, -1, 1, r=0.4)
    cells = np.full(4, bp.OUT_OF_RANGE, dtype=np.uint32)
    cache = synthetic_cache(cells, 1, frustum, grid)
    features = np.ones((1, 2, 1, 4), dtype=np.float32)
    dist = np.ones((1, 1, 1, 4), dtype=np.float32)
    out = bp.pool(features, dist, cache, grid, bp.Reducer.SUM, backend)
    assert out.values.shape == (2, 3, 1)
    assert not out.values.any()


@pytest.mark.parametrize("backend", bp.BACKENDS)
def test_zero_channels(backend):
    rig, frustum, grid, features, dist, cache = random_instance(17)
    features = features[:, :0]
    out = bp.pool(features, dist, cache, grid, bp.Reducer.SUM, backend)
    assert out.values.shape == (0, grid.nx, grid.ny)


def test_permutation_invariance_of_naive():
    # accumulating the same (cell, weighted-feature) multiset in a shuffled
    # order reproduces the scatter result within tolerance
    rng = np.random.default_rng(8)
    frustum = bp.FrustumSpec(2, 3, 1.0, 1.0, 4)
    grid = bp.BevGridSpec(0, 2, 0, 2, -1, 1, r=1.0)
    cells = rng.integers(0, 4, size=24).astype(np.uint32)
    features = rng.uniform(-1, 1, (1, 2, 2, 3)).astype(np.float32)
    dist = bp.normalize_depth(rng.uniform(-1, 1, (1, 4, 2, 3)).astype(np.float32))
    base = bp.pool_naive(
        features, dist, synthetic_cache(cells, 1, frustum, grid), grid
    )
    pairs = []
    i = 0
    for h in range(2):
        for w in range(3):
            for d in range(4):
                pairs.append((int(cells[i]), dist[0, d, h, w] * features[0, :, h, w]))
                i += 1
    total = np.zeros((2, 4))
    for p in rng.permutation(len(pairs)):
        cell, vec = pairs[p]
        total[:, cell] += vec
    assert max_rel_dev(base.values, total.reshape(2, 2, 2)) < REL_TOL


def test_interval_bit_identical_across_worker_counts():
    rig, frustum, grid, features, dist, cache = random_instance(21)
    before = bp.get_parallelism()
    try:
        bp.set_parallelism(1)
        one = bp.pool_interval(features, dist, cache, grid, bp.Reducer.SUM)
        bp.set_parallelism(4)
        four = bp.pool_interval(features, dist, cache, grid, bp.Reducer.SUM)
    finally:
        bp.set_parallelism(before)
    assert one.values.tobytes() == four.values.tobytes()


def test_mass_conservation_small():
    rig, frustum, grid, features, dist, cache = random_instance(33)
    out = bp.pool_naive(features, dist, cache, grid, bp.Reducer.SUM)
    # independent total: sum weight * feature over in-range points
    keep = cache.cell_of_point != bp.OUT_OF_RANGE
    keep_pixels = keep.reshape(dist.shape[0], dist.shape[2], dist.shape[3],
                               dist.shape[1])
    w_in = np.where(keep_pixels, dist.transpose(0, 2, 3, 1), 0.0).sum(axis=3)
    expect = np.einsum("nhw,nchw->", w_in.astype(np.float64),
                       features.astype(np.float64))
    got = out.values.astype(np.float64).sum()
    if abs(expect) > 1e-9:
        assert abs(got - expect) / abs(expect) < 1e-3
    else:
        assert abs(got - expect) < 1e-6


class TestErrors:
    def test_prefixsum_rejects_max(self):
        features, dist, cache, grid = worked_example()
        with pytest.raises(UnsupportedReducerError):
            bp.pool_prefixsum(features, dist, cache, grid, bp.Reducer.MAX)
        with pytest.raises(UnsupportedReducerError):
            bp.pool(features, dist, cache, grid, bp.Reducer.MAX, "prefixsum")

    def test_unknown_backend(self):
        features, dist, cache, grid = worked_example()
        with pytest.raises(ConfigurationError, match="backend"):
            bp.pool(features, dist, cache, grid, bp.Reducer.SUM, "gpu")

    def test_unknown_reducer_name(self):
        with pytest.raises(ConfigurationError, match="reducer"):
            bp.Reducer.parse("median")

    def test_shape_mismatch(self):
        features, dist, cache, grid = worked_example()
        with pytest.raises(ValidationError):
            bp.pool_naive(features[:, :, :, :2], dist, cache, grid)

    def test_wrong_dtype(self):
        features, dist, cache, grid = worked_example()
        with pytest.raises(ValidationError, match="float32"):
            bp.pool_naive(features.astype(np.float64), dist, cache, grid)

    def test_non_finite_features(self):
        features, dist, cache, grid = worked_example()
        bad = features.copy()
        bad[0, 0, 0, 0] = np.nan
        with pytest.raises(ValidationError, match="finite"):
            bp.pool_naive(bad, dist, cache, grid)

    def test_stale_cache_wrong_point_count(self):
        features, dist, cache, grid = worked_example()
        with pytest.raises(StaleCacheError):
            bp.pool_naive(
                np.ones((1, 1, 1, 5), dtype=np.float32),
                np.ones((1, 1, 1, 5), dtype=np.float32),
                cache, grid,
            )

    def test_stale_cache_wrong_grid(self):
        features, dist, cache, grid = worked_example()
        other = bp.BevGridSpec(0.0, 2.4, 0.0, 0.8, -1, 1, r=0.4)
        with pytest.raises(StaleCacheError):
            bp.pool_naive(features, dist, cache, other)


def test_reorder_weights_matches_rank_order():
    rig, frustum, grid, features, dist, cache = random_instance(40)
    weights = bp.reorder_weights(dist, cache)
    assert weights.shape == (cache.n_in_range,)
    h, w, d = frustum.height, frustum.width, frustum.depth_bins
    for j in [0, cache.n_in_range // 2, cache.n_in_range - 1]:
        p = int(cache.ranks[j])
        di = p % d
        rest = p // d
        wi = rest % w
        rest //= w
        hi = rest % h
        ni = rest // h
        assert weights[j] == dist[ni, di, hi, wi]


def test_reorder_weights_stale_cache():
    rig, frustum, grid, features, dist, cache = random_instance(41)
    with pytest.raises(StaleCacheError):
        bp.reorder_weights(dist[:, :, :, :-1].copy(), cache)
