import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from scopemon.errors import DegenerateData, DimensionMismatch, NonFiniteValue, ParseError
from scopemon.features import (
    FeatureMatrix,
    fit_pca,
    pca_inverse,
    pca_transform,
    read_csv,
    write_csv,
)


def test_feature_matrix_validation():
    with pytest.raises(NonFiniteValue) as err:
        FeatureMatrix([[1.0, np.nan]])
    assert err.value.index == (0, 1)
    with pytest.raises(DimensionMismatch):
        FeatureMatrix(np.zeros((3, 2)), [1, 0])
    fm = FeatureMatrix(np.zeros((2, 2)), [1, 0])
    assert fm.accuracy() == 0.5


def test_rank_one_data():
    t = np.linspace(-2, 3, 40)
    x = np.stack((t, 2 * t, -t), axis=1) + np.array([1.0, 0.0, 5.0])
    model = fit_pca(x, 0.85)
    assert model.k == 1
    assert model.explained_ratio[0] == pytest.approx(1.0)


def test_full_retention_keeps_rank(rng):
    x = rng.normal(size=(6, 10))
    assert fit_pca(x, 1.0).k == 5
    y = rng.normal(size=(50, 4))
    assert fit_pca(y, 1.0).k == 4


def test_rank_one_projection_by_hand():
    model = fit_pca(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]), 0.85)
    # mean (1, 1), component (1, 1)/sqrt(2): (3, 3) -> (2, 2).(1, 1)/sqrt(2)
    z = pca_transform(model, [[3.0, 3.0]]).data
    assert z.shape == (1, 1)
    assert z[0, 0] == pytest.approx(2 * math.sqrt(2))
    assert pca_transform(model, [[1.0, 1.0]]).data[0, 0] == pytest.approx(0.0, abs=1e-15)


def test_mean_row_maps_to_zero(rng):
    x = rng.normal(size=(30, 5)) @ rng.normal(size=(5, 5))
    model = fit_pca(x, 0.9)
    assert np.allclose(pca_transform(model, x.mean(axis=0, keepdims=True)).data, 0, atol=1e-12)


def test_reconstruction_error_matches_dropped_variance(rng):
    x = rng.normal(size=(200, 6)) * np.array([5, 3, 2, 1, 0.5, 0.2])
    model = fit_pca(x, 0.85)
    back = pca_inverse(model, pca_transform(model, x))
    total = ((x - x.mean(axis=0)) ** 2).sum()
    lost = ((x - back) ** 2).sum()
    assert lost / total == pytest.approx(1 - model.explained_ratio.sum(), rel=1e-9)


def test_target_is_tight(rng):
    x = rng.normal(size=(300, 8)) * np.arange(8, 0, -1)
    for target in (0.3, 0.5, 0.85, 0.95):
        model = fit_pca(x, target)
        cumulative = np.cumsum(model.explained_ratio)
        assert cumulative[-1] >= target
        assert model.k == 1 or cumulative[-2] < target


@given(arrays(float, st.tuples(st.integers(3, 25), st.integers(1, 6)),
              elements=st.floats(-100, 100, allow_nan=False, width=32)),
       st.floats(0.05, 1.0))
def test_pca_invariants(x, target):
    if np.ptp(x, axis=0).max() == 0:
        with pytest.raises(DegenerateData):
            fit_pca(x, target)
        return
    model = fit_pca(x, target)
    c = model.components
    assert np.allclose(c @ c.T, np.eye(model.k), atol=1e-8)
    ratio = model.explained_ratio
    assert np.all(ratio >= 0) and np.all(ratio <= 1 + 1e-12)
    assert np.all(np.diff(ratio) <= 1e-12)
    for row in c:
        assert row[np.argmax(np.abs(row))] > 0
    again = fit_pca(x.copy(), target)
    assert again.components.tobytes() == c.tobytes()


def test_projected_columns_uncorrelated(rng):
    x = rng.normal(size=(500, 5)) @ rng.normal(size=(5, 5))
    model = fit_pca(x, 1.0)
    z = pca_transform(model, x).data
    cov = np.cov(z.T)
    off = cov - np.diag(np.diag(cov))
    assert np.abs(off).max() < 1e-8 * np.diag(cov).max()


def test_standardize_flag(rng):
    x = rng.normal(size=(100, 3)) * np.array([1000.0, 1.0, 1.0])
    assert fit_pca(x, 0.85).k == 1
    assert fit_pca(x, 0.85, standardize=True).k >= 2


def test_transform_checks_dimension(rng):
    model = fit_pca(rng.normal(size=(10, 3)))
    with pytest.raises(DimensionMismatch):
        pca_transform(model, rng.normal(size=(4, 2)))


def test_transform_carries_labels(rng):
    fm = FeatureMatrix(rng.normal(size=(10, 3)), [1, 0] * 5)
    model = fit_pca(fm)
    assert pca_transform(model, fm).correct.tolist() == [1, 0] * 5


def test_zero_variance_rejected():
    with pytest.raises(DegenerateData):
        fit_pca(np.ones((5, 2)))


def test_csv_round_trip(tmp_path, rng):
    fm = FeatureMatrix(rng.normal(size=(7, 3)), [1, 0, 1, 1, 0, 0, 1])
    write_csv(tmp_path / "x.csv", fm)
    back = read_csv(tmp_path / "x.csv")
    assert back.data.tobytes() == fm.data.tobytes()
    assert back.correct.tolist() == fm.correct.tolist()


def test_csv_column_order_is_by_name(tmp_path):
    (tmp_path / "x.csv").write_text("correct,f1,f0\n1,2.5,1.5\n0,4,3\n")
    fm = read_csv(tmp_path / "x.csv")
    assert fm.data.tolist() == [[1.5, 2.5], [3.0, 4.0]]
    assert fm.correct.tolist() == [1, 0]


@pytest.mark.parametrize("text, line", [
    ("f0,f1\n1,\n", 2),
    ("f0,f1\n1,2\n3\n", 3),
    ("f0,f2\n1,2\n", 1),
    ("f0,correct\n1,2\n", 2),
    ("f0\n1,5\n", 2),
    ("f0\nnan\n", 2),
    ("", 1),
])
def test_csv_errors_report_line(tmp_path, text, line):
    (tmp_path / "bad.csv").write_text(text)
    with pytest.raises(ParseError) as err:
        read_csv(tmp_path / "bad.csv")
    assert err.value.line == line
    assert "bad.csv" in str(err.value)
