import numpy as np
import pytest

import bevpool as bp
from bevpool.errors import ValidationError


def test_constant_logits_give_uniform():
    logits = np.full((2, 5, 3, 4), 0.7, dtype=np.float32)
    dist = bp.normalize_depth(logits)
    np.testing.assert_allclose(dist, 0.2, atol=1e-7)


def test_hand_evaluated_softmax():
    # exp(0) = 1, exp(ln 3) = 3  ->  (0.25, 0.75)
    logits = np.zeros((1, 2, 1, 1), dtype=np.float32)
    logits[0, 1, 0, 0] = np.log(3.0)
    dist = bp.normalize_depth(logits)
    np.testing.assert_allclose(dist[0, :, 0, 0], [0.25, 0.75], atol=1e-7)


def test_extreme_logit_is_stable():
    logits = np.zeros((1, 4, 1, 1), dtype=np.float32)
    logits[0, 2, 0, 0] = 1000.0
    dist = bp.normalize_depth(logits)
    assert np.isfinite(dist).all()
    assert dist[0, 2, 0, 0] == pytest.approx(1.0, abs=1e-6)


def test_sums_to_one_and_nonnegative():
    rng = np.random.default_rng(0)
    logits = rng.normal(scale=4.0, size=(3, 16, 8, 9)).astype(np.float32)
    dist = bp.normalize_depth(logits)
    assert dist.min() >= 0
    bp.check_depth_distribution(dist)


def test_shift_invariance():
    rng = np.random.default_rng(1)
    logits = rng.normal(size=(2, 7, 4, 5)).astype(np.float32)
    shift = rng.normal(size=(2, 1, 4, 5)).astype(np.float32)
    a = bp.normalize_depth(logits)
    b = bp.normalize_depth(logits + shift)
    assert np.abs(a.astype(np.float64) - b).max() < 1e-6


def test_rejects_non_finite():
    logits = np.zeros((1, 2, 1, 1), dtype=np.float32)
    logits[0, 0, 0, 0] = np.nan
    with pytest.raises(ValidationError):
        bp.normalize_depth(logits)
    logits[0, 0, 0, 0] = np.inf
    with pytest.raises(ValidationError):
        bp.normalize_depth(logits)


def test_rejects_bad_rank():
    with pytest.raises(ValidationError):
        bp.normalize_depth(np.zeros((2, 3), dtype=np.float32))


class TestPointWeight:
    def test_uniform(self):
        dist = bp.normalize_depth(np.zeros((1, 8, 2, 2), dtype=np.float32))
        assert bp.point_weight(dist, 0, 1, 1, 3) == pytest.approx(0.125)

    def test_one_hot(self):
        dist = np.zeros((1, 4, 1, 1), dtype=np.float32)
        dist[0, 2, 0, 0] = 1.0
        assert bp.point_weight(dist, 0, 0, 0, 2) == 1.0
        assert bp.point_weight(dist, 0, 0, 0, 1) == 0.0

    def test_from_softmax_example(self):
        logits = np.zeros((1, 2, 1, 1), dtype=np.float32)
        logits[0, 1, 0, 0] = np.log(3.0)
        dist = bp.normalize_depth(logits)
        assert bp.point_weight(dist, 0, 0, 0, 1) == pytest.approx(0.75, abs=1e-7)

    def test_index_errors(self):
        dist = bp.normalize_depth(np.zeros((2, 3, 4, 5), dtype=np.float32))
        for bad in ((2, 0, 0, 0), (0, 4, 0, 0), (0, 0, 5, 0), (0, 0, 0, 3)):
            with pytest.raises(IndexError):
                bp.point_weight(dist, *bad)


def test_check_rejects_unnormalized():
    dist = np.full((1, 4, 1, 1), 0.3, dtype=np.float32)
    with pytest.raises(ValidationError):
        bp.check_depth_distribution(dist)
