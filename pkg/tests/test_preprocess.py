import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from solarcast.errors import EmptyMatrix, NegativeTarget, TooFewValues, ZeroVariance
from solarcast.preprocess import (
    OutlierBounds,
    TransformState,
    detect_outliers,
    fit_transform_state,
    inverse_transform,
    outlier_bounds,
    quartiles,
    skewness,
    skewness_report,
    sqrt_transform,
    zscore_apply,
    zscore_fit,
)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
vectors = arrays(float, st.integers(3, 60), elements=finite)


def oracle_quantile(values, p):
    xs = sorted(values)
    pos = (len(xs) - 1) * p
    k = int(np.floor(pos))
    if k + 1 >= len(xs):
        return xs[-1]
    return xs[k] + (pos - k) * (xs[k + 1] - xs[k])


def test_quartiles_of_five_points():
    q = quartiles([1, 2, 3, 4, 5])
    assert (q.q1, q.q3, q.iqr) == (2, 4, 2)


def test_constant_quartiles():
    q = quartiles([7, 7, 7, 7])
    assert q.q1 == q.q3 == 7 and q.iqr == 0


def test_quartiles_need_two_values():
    with pytest.raises(TooFewValues):
        quartiles([1.0])


@given(vectors)
def test_quartiles_match_sort_oracle(x):
    q = quartiles(x)
    assert q.q1 == pytest.approx(oracle_quantile(x, 0.25), abs=1e-9)
    assert q.q3 == pytest.approx(oracle_quantile(x, 0.75), abs=1e-9)
    assert q.q1 <= q.q3


def test_bounds_and_outliers():
    b = outlier_bounds([1, 2, 3, 4, 5])
    assert (b.lower, b.upper) == (-1, 7)
    assert not detect_outliers([1, 2, 3, 4, 5], b).any()
    assert detect_outliers([10], OutlierBounds(-1, 7)).tolist() == [True]


@given(vectors)
def test_outlier_mask_matches_explicit_loop(x):
    b = outlier_bounds(x)
    expected = [v < b.lower or v > b.upper for v in x]
    assert detect_outliers(x, b).tolist() == expected


@given(vectors, st.randoms(use_true_random=False))
def test_outlier_mask_permutes_with_input(x, r):
    b = outlier_bounds(x)
    perm = list(range(len(x)))
    r.shuffle(perm)
    np.testing.assert_array_equal(detect_outliers(x[perm], b), detect_outliers(x, b)[perm])


@given(vectors, st.floats(-100, 100))
def test_bounds_translate_with_data(x, c):
    a, b = outlier_bounds(x), outlier_bounds(x + c)
    assert b.lower == pytest.approx(a.lower + c, abs=1e-6)
    assert b.upper == pytest.approx(a.upper + c, abs=1e-6)
    assert quartiles(x + c).iqr == pytest.approx(quartiles(x).iqr, abs=1e-6)


def test_symmetric_sample_has_zero_skew():
    s = skewness([-2, -1, 0, 1, 2])
    assert abs(s.skewness) < 1e-12
    assert s.n == 5 and s.mean == 0 and s.std == pytest.approx(np.sqrt(2.5))


def test_skewness_hand_value():
    x = np.array([0.0, 0.0, 3.0])
    n, m, sd = 3, 1.0, np.std(x, ddof=1)
    expected = n / ((n - 1) * (n - 2)) * np.sum(((x - m) / sd) ** 3)
    assert skewness(x).skewness == pytest.approx(expected, rel=1e-12)


def test_skewness_errors():
    with pytest.raises(TooFewValues):
        skewness([1, 2])
    with pytest.raises(ZeroVariance):
        skewness([3, 3, 3])


@given(vectors, st.floats(0.01, 100))
def test_skewness_scale_invariant(x, a):
    assume(np.std(x) > 1e-3 * (1 + np.abs(x).max()))
    assert skewness(a * x).skewness == pytest.approx(skewness(x).skewness, abs=1e-9)


def test_sqrt_examples():
    np.testing.assert_array_equal(sqrt_transform([0, 1, 4, 9]), [0, 1, 2, 3])
    np.testing.assert_array_equal(inverse_transform([0, 1, 2, 3]), [0, 1, 4, 9])
    assert sqrt_transform([-1e-10])[0] == 0.0
    with pytest.raises(NegativeTarget):
        sqrt_transform([-1e-6])


@given(arrays(float, st.integers(1, 50), elements=st.floats(0, 1e4)))
def test_sqrt_round_trip(y):
    np.testing.assert_allclose(inverse_transform(sqrt_transform(y)), y, rtol=1e-12, atol=1e-12)


def test_sqrt_reduces_right_skew(rng):
    y = rng.gamma(1.2, 1.0, 2000)
    assert skewness(sqrt_transform(y)).skewness < skewness(y).skewness


def test_zscore_examples():
    p = zscore_fit(np.array([[1.0], [2.0], [3.0]]))
    assert p.mean[0] == 2 and p.std[0] == 1
    np.testing.assert_allclose(zscore_apply(p, [[1.0], [2.0], [3.0]])[:, 0], [-1, 0, 1])
    assert zscore_apply(p, [[4.0]])[0, 0] == 2
    const = zscore_fit(np.array([[5.0], [5.0], [5.0]]))
    assert (zscore_apply(const, [[5.0], [5.0], [9.0]]) == 0).all()
    with pytest.raises(EmptyMatrix):
        zscore_fit(np.empty((0, 2)))


@given(arrays(float, st.tuples(st.integers(3, 30), st.integers(1, 4)), elements=finite))
def test_zscore_standardizes_fit_data(X):
    Z = zscore_apply(zscore_fit(X), X)
    live = X.std(axis=0, ddof=1) > 1e-6
    assert np.allclose(Z[:, live].mean(axis=0), 0, atol=1e-9)
    assert np.allclose(Z[:, live].std(axis=0, ddof=1), 1, atol=1e-9)


def test_transform_state_fits_training_rows_only(rng):
    X = rng.normal(size=(200, 3))
    y = np.concatenate([np.zeros(50), rng.gamma(2, 1, 150)])
    y[-1] = 500.0  # a nonzero outlier
    state, keep = fit_transform_state(X, y, ["a", "b", "c"])
    assert not keep[-1] and keep[:50].all()
    assert state.n_outliers_dropped == int((~keep).sum())
    # zeros are excluded from the bounds
    ref = outlier_bounds(y[y != 0])
    assert state.outlier_bounds == ref


def test_transform_state_json_round_trip(rng):
    X = rng.normal(size=(40, 2))
    y = rng.gamma(2, 1, 40)
    state, _ = fit_transform_state(X, y, ["ghi", "hour"])
    back = TransformState.from_json(state.to_json())
    np.testing.assert_array_equal(back.transform_features(X), state.transform_features(X))
    assert back.to_dict() == state.to_dict()
    assert set(state.to_dict()["standardization"]) == {"ghi", "hour"}


def test_inverse_target_clips_undershoot():
    state, _ = fit_transform_state(np.ones((5, 1)) * np.arange(5)[:, None], np.arange(5.0), ["x"])
    assert state.inverse_target([-0.5, 2.0]).tolist() == [0.0, 4.0]


def test_skewness_report_keys(rng):
    y = np.concatenate([np.zeros(100), rng.gamma(1.5, 1, 300)])
    r = skewness_report(y)
    assert r["n_raw"] == 400 and r["n_zero_excluded"] == 300
    assert r["raw"] > r["zero_excluded"] > r["transformed"]
