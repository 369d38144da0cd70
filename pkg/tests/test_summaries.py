import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from semiabc.summaries import (DimensionError, FittedSummary, basis_expand, eval_fitted,
                               literature_summary, s10)

finite = st.floats(-1e6, 1e6, allow_nan=False)
data100 = arrays(np.float64, 100, elements=finite)


def test_s10_on_permuted_range(rng):
    x = rng.permutation(np.arange(1, 101)).astype(float)
    assert np.array_equal(s10(x), np.arange(5, 100, 10))


def test_s10_constant():
    assert np.array_equal(s10(np.full(100, 3.5)), np.full(10, 3.5))


def test_s10_matches_naive_sort(rng):
    x = rng.normal(size=100)
    srt = sorted(x.tolist())
    assert np.array_equal(s10(x), [srt[i - 1] for i in range(5, 100, 10)])


@pytest.mark.parametrize("n", [99, 101, 10])
def test_s10_wrong_length(n):
    with pytest.raises(DimensionError):
        s10(np.zeros(n))
    with pytest.raises(DimensionError):
        basis_expand(np.zeros(n))


def test_s10_batch_rows(rng):
    X = rng.normal(size=(7, 100))
    out = s10(X)
    assert out.shape == (7, 10)
    assert np.array_equal(out[3], s10(X[3]))


def test_literature_b_zeros():
    assert np.array_equal(literature_summary("B", np.zeros(100)), [0.0, 0.0])


def test_literature_c_range():
    assert np.array_equal(literature_summary("C", np.arange(1, 101.0)), [10.0, 90.0])


def test_literature_c_uses_ceil_ranks(rng):
    x = rng.normal(size=37)
    srt = np.sort(x)
    assert np.array_equal(literature_summary("C", x), [srt[3], srt[33]])


def test_literature_b_normal_moments():
    x = np.random.default_rng(8).normal(size=100_000)
    m4, m6 = literature_summary("B", x)
    # sd of the sample moments: sqrt((m8 - m4^2)/n) etc. for N(0, 1)
    assert abs(m4 - 3) < 4 * np.sqrt((105 - 9) / x.size)
    assert abs(m6 - 15) < 4 * np.sqrt((10395 - 225) / x.size)


def test_literature_b_is_central():
    x = np.random.default_rng(1).normal(size=200)
    a, b = literature_summary("B", x), literature_summary("B", x + 1000.0)
    assert np.allclose(a, b, rtol=1e-6)


def test_literature_rejects_unknown_or_short():
    with pytest.raises(ValueError):
        literature_summary("A", np.zeros(100))
    with pytest.raises(ValueError):
        literature_summary("C", np.zeros(5))


def test_basis_constant_and_range():
    assert np.array_equal(basis_expand(np.full(100, 2.0)), np.r_[1.0, np.full(100, 2.0)])
    assert np.array_equal(basis_expand(np.arange(100.0, 0, -1)), np.r_[1.0, np.arange(1, 101.0)])


@settings(max_examples=50, deadline=None)
@given(x=data100)
def test_basis_shape_and_order(x):
    f = basis_expand(x)
    assert f.shape == (101,) and f[0] == 1.0
    assert np.all(np.diff(f[1:]) >= 0)
    # s10 picks ranks 5, 15, ..., 95 of the same sorted vector
    assert np.array_equal(s10(x), f[1:][4::10])


def test_fitted_zero_coefficients(rng):
    fs = FittedSummary(pairs=[(0, 1)], coefficients=np.zeros((1, 101)))
    assert np.array_equal(eval_fitted(fs, rng.normal(size=100)), [0.0])


def test_fitted_unit_intercept(rng):
    beta = np.zeros((1, 101))
    beta[0, 0] = 1.0
    fs = FittedSummary(pairs=[(0, 1)], coefficients=beta)
    for _ in range(3):
        assert np.array_equal(fs(rng.normal(size=100)), [1.0])


def test_fitted_matches_naive_dot(rng):
    beta = rng.normal(scale=0.01, size=(3, 101))
    fs = FittedSummary(pairs=[(0, 1), (0, 2), (1, 2)], coefficients=beta)
    x = rng.normal(size=100)
    srt = sorted(x.tolist())
    naive = [beta[r, 0] + sum(beta[r, i + 1] * srt[i] for i in range(100)) for r in range(3)]
    assert np.allclose(fs(x), naive, atol=1e-12, rtol=0)
    assert fs.output_dim == 3


def test_fitted_clamps_logits():
    beta = np.zeros((2, 101))
    beta[0, 0], beta[1, 0] = 100.0, -100.0
    fs = FittedSummary(pairs=[(0, 1), (0, 2)], coefficients=beta)
    assert np.array_equal(fs(np.zeros(100)), [30.0, -30.0])


@settings(max_examples=30, deadline=None)
@given(x=data100, seed=st.integers(0, 2**32 - 1))
def test_fitted_permutation_invariant(x, seed):
    r = np.random.default_rng(seed)
    fs = FittedSummary(pairs=[(0, 1)], coefficients=r.normal(scale=1e-6, size=(1, 101)))
    assert np.array_equal(fs(x), fs(r.permutation(x)))


def test_fitted_dimension_errors(rng):
    with pytest.raises(DimensionError):
        FittedSummary(pairs=[(0, 1)], coefficients=np.zeros((1, 50)))(rng.normal(size=100))
    with pytest.raises(DimensionError):
        FittedSummary(pairs=[(0, 1), (0, 2)], coefficients=np.zeros((1, 101)))


def test_fitted_json_round_trip(rng):
    fs = FittedSummary(pairs=[(0, 1), (0, 2), (1, 2)], coefficients=rng.normal(size=(3, 101)))
    obj = json.loads(fs.to_json())
    assert set(obj) == {"pairs", "coefficients", "basis"}
    assert obj["basis"] == "order_stats_101"
    back = FittedSummary.from_json(fs.to_json())
    x = rng.normal(size=100)
    assert np.array_equal(back(x), fs(x))
    assert back.pairs == fs.pairs
