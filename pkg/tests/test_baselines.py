import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dhsic.baselines import (
    BmrConfig,
    PairwiseConfig,
    bmr_eval_points,
    bmr_statistic,
    bmr_test,
    pairwise_hsic_test,
)
from dhsic.dataset import Dataset
from dhsic.errors import InputError, UnsupportedData
from dhsic.kernels import KernelSpec
from dhsic.resampling import derive_seed, dhsic_resampling_test


def normals(n, d, seed):
    return Dataset.from_blocks(list(np.random.default_rng(seed).standard_normal((n, d)).T))


def exhaustive_bmr(ds):
    x = np.column_stack(ds.blocks())
    grid = np.array(list(itertools.product(*[np.unique(x[:, j]) for j in range(x.shape[1])])))
    return bmr_statistic(ds, grid)


def test_bmr_hand_example():
    ds = Dataset.from_blocks([np.array([0.0, 1.0]), np.array([0.0, 1.0])])
    assert bmr_statistic(ds, [[0.0, 0.0]]) == 0.25


def test_bmr_single_observation():
    ds = Dataset.from_blocks([np.array([0.3]), np.array([1.2]), np.array([-2.0])])
    pts = np.random.default_rng(0).standard_normal((50, 3))
    assert bmr_statistic(ds, pts) == 0.0
    out = bmr_test(ds, BmrConfig(B=20))
    assert out.statistic == 0.0 and out.p_value == 1.0


def test_bmr_rejects_grouped_or_discrete():
    rng = np.random.default_rng(1)
    grouped = Dataset.from_blocks([rng.standard_normal((10, 2)), rng.standard_normal(10)])
    with pytest.raises(UnsupportedData):
        bmr_statistic(grouped, np.zeros((1, 3)))
    discrete = Dataset.from_blocks([rng.standard_normal(10), rng.integers(0, 2, 10).astype(float)],
                                   kinds=["continuous", "discrete"])
    with pytest.raises(UnsupportedData):
        bmr_test(discrete)
    with pytest.raises(InputError):
        BmrConfig(C=0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
def test_bmr_sampled_below_exhaustive(seed, d):
    rng = np.random.default_rng(seed)
    ds = Dataset.from_blocks(list(rng.standard_normal((8, d)).T))
    pts = bmr_eval_points(ds, 200, rng)
    sampled = bmr_statistic(ds, pts)
    assert 0.0 <= sampled <= exhaustive_bmr(ds) + 1e-15 <= 1.0 + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_bmr_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((20, 3))
    pts = rng.standard_normal((30, 3))
    a = bmr_statistic(Dataset.from_blocks(list(x.T)), pts)
    b = bmr_statistic(Dataset.from_blocks(list(np.arctan(x ** 3).T)), np.arctan(pts ** 3))
    assert a == b


def test_bmr_eval_points_moments():
    rng = np.random.default_rng(2)
    x = rng.standard_normal((200, 2)) @ np.array([[1.0, 0.8], [0.0, 0.6]]) + [3.0, -1.0]
    ds = Dataset.from_blocks(list(x.T))
    pts = bmr_eval_points(ds, 50_000, rng)
    np.testing.assert_allclose(pts.mean(axis=0), x.mean(axis=0), atol=0.03)
    np.testing.assert_allclose(np.cov(pts, rowvar=False), np.cov(x, rowvar=False, bias=True), atol=0.03)


def test_bmr_points_fixed_by_seed():
    ds = normals(40, 3, 3)
    a = bmr_test(ds, BmrConfig(B=30, seed=5))
    b = bmr_test(ds, BmrConfig(B=30, seed=5, workers=2))
    assert a.to_dict() == b.to_dict()
    assert a.details["C"] == 40


def test_bmr_power():
    rejections = 0
    for i in range(30):
        x = np.random.default_rng(100 + i).standard_normal(100)
        rejections += bmr_test(Dataset.from_blocks([x, x]), BmrConfig(B=50, seed=i)).reject
    assert rejections / 30 >= 0.9


def test_bmr_level():
    m = 100
    rejections = sum(bmr_test(normals(100, 3, 200 + i), BmrConfig(B=50, seed=i)).reject for i in range(m))
    assert rejections / m <= 0.05 + 0.03 + 2 * math.sqrt(0.05 * 0.95 / m)


def test_pairwise_d2_matches_single_test():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(40)
        ds = Dataset.from_blocks([x, 0.3 * x + rng.standard_normal(40)])
        pw = pairwise_hsic_test(ds, PairwiseConfig(B=50, seed=seed))
        single = dhsic_resampling_test(ds, [KernelSpec.gaussian()] * 2, B=50, seed=derive_seed(seed, 1))
        assert pw.reject == single.reject
        assert pw.p_value == single.p_value


def test_pairwise_bonferroni_floor():
    rng = np.random.default_rng(4)
    x = rng.standard_normal(50)
    ds = Dataset.from_blocks([x + 0.01 * rng.standard_normal(50) for _ in range(7)])
    out = pairwise_hsic_test(ds, PairwiseConfig(B=100))
    assert out.p_value >= 6 / 101
    assert out.p_value == pytest.approx(6 / 101)
    assert not out.reject
    assert math.isnan(out.crit_value)
    assert len(out.details["sub_p_values"]) == 6


def test_pairwise_gamma_subtests():
    rng = np.random.default_rng(5)
    x = rng.standard_normal(80)
    ds = Dataset.from_blocks([x, rng.standard_normal(80), x ** 2 + 0.1 * rng.standard_normal(80)])
    out = pairwise_hsic_test(ds, PairwiseConfig(method="gamma"))
    assert out.reject and out.B is None
    with pytest.raises(InputError):
        PairwiseConfig(method="bmr")


def test_pairwise_order():
    # X3 is tested against (X1, X2) first, then X2 against X1
    rng = np.random.default_rng(6)
    x = rng.standard_normal(60)
    ds = Dataset.from_blocks([x, x + 0.1 * rng.standard_normal(60), rng.standard_normal(60)])
    out = pairwise_hsic_test(ds, PairwiseConfig(B=50))
    p3, p2 = out.details["sub_p_values"]
    assert p2 < 0.05 < p3


def test_pairwise_level():
    m = 150
    rejections = sum(pairwise_hsic_test(normals(60, 4, 300 + i), PairwiseConfig(B=25, seed=i)).reject
                     for i in range(m))
    assert rejections / m <= 0.05 + 2 * math.sqrt(0.05 * 0.95 / m)
