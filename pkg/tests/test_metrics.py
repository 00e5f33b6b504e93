import numpy as np
import pytest
from hypothesis import given, strategies as st

from cslr.errors import AllZeroWeights, ConstantInput, DimensionMismatch, EmptyInput
from cslr.logistic import LinearModel
from cslr.metrics import accuracy, grouped_contribution, mse, pearson, selection_score


def test_accuracy_basic():
    assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    assert accuracy([1, 0, 1], [0, 1, 0]) == 0.0
    assert accuracy([1, 0, 1], [1, 1, 1]) == pytest.approx(2 / 3)


def test_accuracy_errors():
    with pytest.raises(EmptyInput):
        accuracy([], [])
    with pytest.raises(DimensionMismatch):
        accuracy([1, 0], [1])


def test_selection_perfect():
    m = np.array([True, False, True, False])
    s = selection_score(m, m)
    assert (s.precision, s.recall, s.f1) == (1.0, 1.0, 1.0)


def test_selection_half_half():
    s = selection_score([True, True, False, False], [True, False, True, False])
    assert s.precision == 0.5 and s.recall == 0.5 and s.f1 == 0.5


def test_selection_all_features():
    relevant = np.zeros(500, dtype=bool)
    relevant[:5] = True
    s = selection_score(np.ones(500, dtype=bool), relevant)
    assert s.precision == pytest.approx(0.01)
    assert s.recall == 1.0
    assert s.f1 == pytest.approx(2 * 0.01 / 1.01)
    assert s.f1 == pytest.approx(0.0198, abs=5e-5)


def test_selection_empty_is_zero():
    s = selection_score([False, False], [True, False])
    assert s.precision == 0.0 and s.recall == 0.0 and s.f1 == 0.0


def test_selection_mismatch():
    with pytest.raises(DimensionMismatch):
        selection_score([True], [True, False])


@given(st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=60))
def test_selection_counts(pairs):
    sel = np.array([p[0] for p in pairs])
    rel = np.array([p[1] for p in pairs])
    s = selection_score(sel, rel)
    assert s.tp + s.fp + s.fn + s.tn == len(pairs)
    tp = sum(a and b for a, b in pairs)
    fp = sum(a and not b for a, b in pairs)
    fn = sum(b and not a for a, b in pairs)
    assert (s.tp, s.fp, s.fn) == (tp, fp, fn)
    for v in (s.precision, s.recall, s.f1):
        assert 0.0 <= v <= 1.0
    if s.precision + s.recall > 0:
        assert s.f1 == pytest.approx(2 * s.precision * s.recall / (s.precision + s.recall))


def test_grouped_single_group_mass():
    m = LinearModel(0.3, np.array([0.0, 2.0, -1.0, 0.0]))
    np.testing.assert_array_equal(grouped_contribution(m, [[0, 3], [1, 2]]), [0.0, 1.0])


def test_grouped_equal_groups():
    m = LinearModel(5.0, np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0]))
    np.testing.assert_allclose(grouped_contribution(m, [[0, 1], [2, 3], [4, 5]]), [1 / 3] * 3)


def test_grouped_random_partition():
    rng = np.random.default_rng(0)
    w = rng.normal(size=40)
    labels = rng.integers(0, 6, 40)
    groups = [np.flatnonzero(labels == g) for g in range(6)]
    got = grouped_contribution(LinearModel(1.0, w), groups)
    assert abs(got.sum() - 1.0) < 1e-12
    total = sum(abs(x) for x in w)
    for g, val in zip(groups, got):
        assert val == pytest.approx(sum(abs(w[i]) for i in g) / total, abs=1e-12)
    scaled = grouped_contribution(w * 7.5, groups)
    np.testing.assert_allclose(scaled, got, rtol=1e-12)


def test_grouped_errors():
    with pytest.raises(AllZeroWeights):
        grouped_contribution(LinearModel(1.0, np.zeros(3)), [[0, 1, 2]])
    with pytest.raises(ValueError):
        grouped_contribution(np.ones(3), [[0, 1]])
    with pytest.raises(ValueError):
        grouped_contribution(np.ones(3), [[0, 1], [1, 2]])


def test_pearson_basic():
    a = np.array([1.0, 2.0, 4.0])
    assert pearson(a, a) == 1.0
    assert pearson(a, -a) == -1.0


def test_pearson_random_matches_formula():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=(2, 30))
    cov = sum((x - a.mean()) * (y - b.mean()) for x, y in zip(a, b))
    va = sum((x - a.mean()) ** 2 for x in a)
    vb = sum((y - b.mean()) ** 2 for y in b)
    assert abs(pearson(a, b) - cov / np.sqrt(va * vb)) < 1e-12


def test_pearson_affine_invariance():
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(2, 25))
    assert abs(pearson(3.0 * a + 2.0, b) - pearson(a, b)) < 1e-10
    assert abs(pearson(a, 0.2 * b - 7.0) - pearson(a, b)) < 1e-10


def test_pearson_errors():
    with pytest.raises(ConstantInput):
        pearson([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
    with pytest.raises(ConstantInput):
        pearson([1.0], [2.0])


def test_mse():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert mse([1.0, 1.0], [0.0, 0.0]) == 1.0
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(2, 50))
    naive = sum((x - y) ** 2 for x, y in zip(a, b)) / 50
    assert abs(mse(a, b) - naive) < 1e-12
    with pytest.raises(DimensionMismatch):
        mse([1.0], [1.0, 2.0])
