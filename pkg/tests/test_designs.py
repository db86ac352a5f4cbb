import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfgp.designs import (REFERENCE_MF_COUNTS, REFERENCE_MF_LEVELS, CostTable, Design, DesignKind,
                          DesignSpec, design_cost, lhs, maximin_subset, nested_design,
                          reference_designs, unit_box)
from mfgp.exceptions import DesignError


def _rows(X):
    return {tuple(r) for r in X}


def test_lhs_single_point_inside_box():
    box = np.array([[2.0, 3.0], [-1.0, 1.0]])
    x = lhs(1, box, 0)
    assert x.shape == (1, 2)
    assert np.all(x >= box[:, 0]) and np.all(x <= box[:, 1])


def test_lhs_one_value_per_decile():
    X = lhs(10, unit_box(3), 42)
    for j in range(3):
        np.testing.assert_array_equal(np.sort(np.floor(X[:, j] * 10)), np.arange(10))


def test_lhs_projection_uniformity():
    box = np.array([[0.0, 4.0], [-1.0, 1.0]])
    means = np.mean([lhs(10, box, s).mean(axis=0) for s in range(200)], axis=0)
    width = box[:, 1] - box[:, 0]
    assert np.all(np.abs(means - box.mean(axis=1)) < 3 * width / np.sqrt(12 * 10 * 200))


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 60), d=st.integers(1, 5), seed=st.integers(0, 2**31))
def test_lhs_stratification_property(n, d, seed):
    lo = np.linspace(-2, 1, d)
    box = np.column_stack([lo, lo + np.arange(1, d + 1)])
    X = lhs(n, box, seed)
    u = (X - box[:, 0]) / (box[:, 1] - box[:, 0])
    strata = np.minimum(np.floor(u * n), n - 1)
    for j in range(d):
        np.testing.assert_array_equal(np.sort(strata[:, j]), np.arange(n))


def test_lhs_deterministic_and_errors():
    np.testing.assert_array_equal(lhs(7, unit_box(2), 3), lhs(7, unit_box(2), 3))
    with pytest.raises(DesignError):
        lhs(0, unit_box(2))
    with pytest.raises(DesignError):
        lhs(3, np.empty((0, 2)))
    with pytest.raises(DesignError):
        lhs(3, [[1.0, 1.0]])


def test_reference_nested_design_counts_and_nesting():
    spec = DesignSpec(DesignKind.NESTED_MF, REFERENCE_MF_LEVELS, REFERENCE_MF_COUNTS, unit_box(8), 0)
    design = nested_design(spec)
    assert len(design) == 400
    counts = {round(t, 4): c for t, c in design.level_counts().items()}
    assert counts == {100.0: 270, 50.0: 90, 33.3333: 30, 25.0: 10}
    sets = [_rows(design.X[np.isclose(design.T, t)]) for t in REFERENCE_MF_LEVELS]
    for coarse, fine in zip(sets, sets[1:]):
        assert fine <= coarse


def test_small_nested_case():
    design = nested_design(DesignSpec("nested", (3.0, 2.0, 1.0), (4, 2, 1), unit_box(2), 5))
    l1, l2, l3 = (_rows(design.X[design.T == t]) for t in (3.0, 2.0, 1.0))
    assert len(l1) == 4 and len(l2) == 2 and len(l3) == 1
    assert l3 <= l2 <= l1


def test_level_order_and_trailing_zero_level():
    design = nested_design(DesignSpec("nested", (25.0, 100.0, 20.0), (10, 30, 0), unit_box(2), 1))
    assert design.T[0] == 100.0 and design.T[-1] == 25.0
    assert len(design) == 40


def test_single_level_reduces_to_lhs():
    box = unit_box(3)
    design = nested_design(DesignSpec("lhs", (20.0,), (17,), box, 9))
    np.testing.assert_array_equal(design.X, lhs(17, box, 9))
    assert np.all(design.T == 20.0)


@pytest.mark.parametrize("levels, counts", [
    ((2.0, 1.0), (3, 3)),
    ((2.0, 1.0), (2, 5)),
    ((3.0, 2.0, 1.0), (5, 0, 2)),
    ((2.0, 2.0), (3, 2)),
    ((2.0, 1.0), (0, 0)),
])
def test_invalid_nested_counts(levels, counts):
    with pytest.raises(DesignError):
        nested_design(DesignSpec("nested", levels, counts, unit_box(2), 0))


def test_maximin_subset_spreads_points():
    pts = np.array([[0.5, 0.5], [0.0, 0.0], [1.0, 1.0], [0.51, 0.5], [0.0, 1.0]])
    idx = maximin_subset(pts, 3)
    assert idx[0] == 0  # nearest the centroid
    assert set(idx[1:]) <= {1, 2, 4}
    assert len(maximin_subset(pts, 0)) == 0


def test_reference_costs():
    mf, hf = reference_designs(8, seed=0)
    c_mf, c_hf = design_cost(mf), design_cost(hf)
    assert c_mf == pytest.approx(492.5, abs=1e-9)
    assert c_hf == pytest.approx(5400.0, abs=1e-9)
    assert c_hf / c_mf == pytest.approx(10.96, abs=0.005)
    assert abs(c_hf / c_mf - 11) <= 0.5


def test_cost_table_behaviour():
    table = CostTable()
    assert table.cost(33.33333333) == 6.0
    assert table.cost(33.333333333333336) == 6.0
    with pytest.raises(DesignError):
        table.cost(33.33)
    with pytest.raises(DesignError):
        design_cost([10.0])
    with pytest.raises(DesignError):
        CostTable({1.0: 0.0})
    levels = sorted(table.costs)
    assert all(table.cost(a) >= table.cost(b) for a, b in zip(levels, levels[1:]))


@settings(max_examples=50, deadline=None)
@given(a=st.lists(st.sampled_from([100.0, 50.0, 100.0 / 3.0, 25.0, 20.0]), min_size=1, max_size=30),
       b=st.lists(st.sampled_from([100.0, 50.0, 100.0 / 3.0, 25.0, 20.0]), min_size=1, max_size=30))
def test_cost_additive(a, b):
    da = Design(np.zeros((len(a), 1)), np.array(a))
    db = Design(np.zeros((len(b), 1)), np.array(b))
    assert design_cost(da + db) == pytest.approx(design_cost(da) + design_cost(db), rel=1e-12)
