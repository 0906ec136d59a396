import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dhsic.dataset import Dataset
from dhsic.errors import DegenerateSample, InputError
from dhsic.kernels import KernelSpec, gram, gram_stack, kernel_value, median_bandwidth, sq_distances

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def test_median_single_pair():
    assert median_bandwidth([0.0, 2.0]) == pytest.approx(math.sqrt(2.0), abs=1e-15)


def test_median_three_points():
    # squared distances {1, 4, 9}, median 4
    assert median_bandwidth([0.0, 1.0, 3.0]) == pytest.approx(math.sqrt(2.0), abs=1e-15)


def test_median_even_count_averages_middle_pair():
    # squared distances {1, 4, 4, 9, 16, 25}, middle pair (4, 9)
    assert median_bandwidth([0.0, 1.0, 3.0, 5.0]) == pytest.approx(math.sqrt(6.5 / 2.0))


def test_median_degenerate():
    with pytest.raises(DegenerateSample):
        median_bandwidth([1.0, 1.0, 1.0])
    with pytest.raises(DegenerateSample):
        median_bandwidth([1.0])


def test_median_scales_with_data():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((30, 2))
    assert median_bandwidth(4.0 * x) == pytest.approx(4.0 * median_bandwidth(x), rel=1e-14)


def test_spec_validation():
    with pytest.raises(InputError):
        KernelSpec.gaussian(0.0)
    with pytest.raises(InputError):
        KernelSpec.gaussian(-1.0)
    with pytest.raises(InputError):
        KernelSpec("discrete", 1.0)


def test_discrete_gram():
    K = gram(np.array([1.0, 1.0, 2.0]), KernelSpec.discrete())
    np.testing.assert_array_equal(K, [[1, 1, 0], [1, 1, 0], [0, 0, 1]])


def test_gaussian_half():
    K = gram(np.array([0.0, math.sqrt(2 * math.log(2))]), KernelSpec.gaussian(1.0))
    assert K[0, 1] == pytest.approx(0.5, abs=1e-15)
    assert K[0, 0] == 1.0


def test_identical_points_give_ones():
    np.testing.assert_array_equal(gram(np.full(5, 3.2), KernelSpec.gaussian(0.7)), np.ones((5, 5)))


def test_gram_matches_scalar_kernel():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((6, 2))
    spec = KernelSpec.gaussian(1.3)
    K = gram(x, spec)
    for i in range(6):
        for j in range(6):
            assert K[i, j] == pytest.approx(kernel_value(x[i], x[j], spec), abs=1e-15)


def test_gram_stack_freezes_median():
    rng = np.random.default_rng(4)
    ds = Dataset.from_blocks([rng.standard_normal(20), rng.integers(0, 3, 20).astype(float)],
                             kinds=["continuous", "discrete"])
    stack = gram_stack(ds)
    assert stack.bandwidths[0] == pytest.approx(median_bandwidth(ds.block(0)))
    assert stack.bandwidths[1] is None


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 30), st.integers(1, 3)), elements=finite),
       st.floats(0.1, 10))
def test_gaussian_gram_properties(x, sigma):
    K = gram(x, KernelSpec.gaussian(sigma))
    np.testing.assert_array_equal(K, K.T)
    np.testing.assert_array_equal(np.diag(K), 1.0)
    assert K.min() >= 0.0 and K.max() <= 1.0
    assert np.linalg.eigvalsh(K).min() >= -1e-8


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.integers(3, 30), elements=st.integers(-3, 3).map(float)))
def test_discrete_gram_properties(x):
    K = gram(x, KernelSpec.discrete())
    assert set(np.unique(K)) <= {0.0, 1.0}
    np.testing.assert_array_equal(np.diag(K), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100))
def test_median_gram_scale_invariant(seed, c):
    x = np.random.default_rng(seed).standard_normal((15, 2))
    K1 = gram(x, KernelSpec.gaussian())
    K2 = gram(c * x, KernelSpec.gaussian())
    np.testing.assert_allclose(K1, K2, rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_row_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((12, 2))
    p = rng.permutation(12)
    spec = KernelSpec.gaussian(0.9)
    np.testing.assert_array_equal(gram(x[p], spec), gram(x, spec)[np.ix_(p, p)])


def test_sq_distances_symmetric_zero_diagonal():
    x = np.random.default_rng(5).standard_normal((10, 3)) * 1e3
    D = sq_distances(x)
    np.testing.assert_array_equal(D, D.T)
    np.testing.assert_array_equal(np.diag(D), 0.0)
