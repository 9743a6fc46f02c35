import numpy as np
import pytest
from hypothesis import given, strategies as st

from mklsp.sparse import GroupedSparseVector, SparseVector, sparse_dot

entries = st.dictionaries(
    st.integers(min_value=0, max_value=40),
    st.floats(min_value=-5, max_value=5, allow_nan=False, width=32),
    max_size=12,
)


def test_from_dict_sorts_and_drops_zeros():
    sv = SparseVector.from_dict({7: 1.0, 2: 0.0, 5: -3.0})
    assert sv.indices.tolist() == [5, 7]
    assert sv.values.tolist() == [-3.0, 1.0]
    assert sv.nnz == 2


def test_empty_vector():
    sv = SparseVector.from_dict({})
    assert sv.nnz == 0
    assert sparse_dot(sv, sv) == 0.0


@given(entries, entries)
def test_sparse_dot_matches_dense(da, db):
    a = SparseVector.from_dict(da)
    b = SparseVector.from_dict(db)
    size = 41
    va = np.zeros(size)
    vb = np.zeros(size)
    for i, v in da.items():
        va[i] = v
    for i, v in db.items():
        vb[i] = v
    assert sparse_dot(a, b) == pytest.approx(float(va @ vb), abs=1e-9)
    assert a.dot_dense(va) == pytest.approx(float(va @ va), abs=1e-9)


@given(entries)
def test_norm_sq(d):
    sv = SparseVector.from_dict(d)
    assert sv.norm_sq() == pytest.approx(sum(v * v for v in d.values()), rel=1e-12, abs=1e-12)


def test_equality_is_exact():
    a = SparseVector.from_dict({1: 2.0, 3: 4.0})
    b = SparseVector.from_dict({1: 2.0, 3: 4.0})
    c = SparseVector.from_dict({1: 2.0, 3: 4.0 + 1e-12})
    assert a == b
    assert a != c


@given(st.lists(entries, min_size=1, max_size=4), st.lists(entries, min_size=1, max_size=4))
def test_grouped_dot_decomposes(groups_a, groups_b):
    m = min(len(groups_a), len(groups_b))
    ga = GroupedSparseVector.from_dicts(groups_a[:m])
    gb = GroupedSparseVector.from_dicts(groups_b[:m])
    total = ga.dot(gb)
    parts = sum(sparse_dot(ga.groups[j], gb.groups[j]) for j in range(m))
    assert total == pytest.approx(parts, rel=1e-12, abs=1e-12)
    for j in range(m):
        assert ga.group_dot(gb, j) == sparse_dot(ga.groups[j], gb.groups[j])


def test_grouped_is_zero():
    assert GroupedSparseVector.from_dicts([{}, {}]).is_zero()
    assert not GroupedSparseVector.from_dicts([{}, {3: 1.0}]).is_zero()


def test_grouped_dot_dense():
    g = GroupedSparseVector.from_dicts([{0: 2.0}, {1: 3.0}])
    w = [np.array([10.0, 0.0]), np.array([0.0, 5.0, 0.0])]
    assert g.dot_dense(w) == pytest.approx(35.0)
