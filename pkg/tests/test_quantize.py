import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from droo.errors import DomainError
from droo.quantize import all_vertices, knn_quantize, order_preserving_quantize

WORKED = [0.2, 0.4, 0.7, 0.9]


def test_order_preserving_worked_example():
    out = order_preserving_quantize(WORKED, 4)
    assert out.tolist() == [[0, 0, 1, 1], [0, 1, 1, 1], [0, 0, 0, 1], [1, 1, 1, 1]]


def test_knn_worked_example():
    out = knn_quantize(WORKED, 4)
    assert out.tolist() == [[0, 0, 1, 1], [0, 1, 1, 1], [0, 0, 0, 1], [0, 1, 0, 1]]


def test_first_candidate_is_rounding():
    assert order_preserving_quantize([0.1, 0.3, 0.49], 1).tolist() == [[0, 0, 0]]
    gen = np.random.default_rng(0)
    for _ in range(200):
        x = gen.uniform(0.01, 0.99, 6)
        np.testing.assert_array_equal(order_preserving_quantize(x, 1)[0], knn_quantize(x, 1)[0])


def test_full_chain_distinct_and_monotone():
    gen = np.random.default_rng(1)
    for _ in range(100):
        x = gen.uniform(0.01, 0.99, 8)
        out = order_preserving_quantize(x, 9)
        assert len({tuple(r) for r in out}) == 9
        # every candidate is a threshold set of the x-order: sorting by x gives a 0...01...1 row
        rows = out[:, np.argsort(x)]
        assert np.all(np.diff(rows, axis=1) >= 0)


def test_all_vertices_order():
    v = all_vertices(3)
    assert v.tolist() == [list(b) for b in itertools.product([0, 1], repeat=3)]


def test_knn_full_enumeration_matches_brute_force():
    x = np.array([0.3, 0.8, 0.55])
    out = knn_quantize(x, 8)
    verts = sorted(itertools.product([0, 1], repeat=3), key=lambda v: (round(sum((np.array(v) - x) ** 2), 12), v))
    assert out.tolist() == [list(v) for v in verts]


def test_knn_tie_break_is_lexicographic():
    out = knn_quantize([0.5, 0.5], 4)
    assert out.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_order_preserving_ties_keep_duplicates():
    out = order_preserving_quantize([0.25, 0.75, 0.25], 4)
    assert out.shape == (4, 3)
    # |x - 0.5| ties are broken by index: devices 0, 1, 2 in turn
    assert out.tolist() == [[0, 1, 0], [1, 1, 1], [0, 0, 0], [1, 1, 1]]


def test_bounds():
    with pytest.raises(DomainError):
        order_preserving_quantize(WORKED, 6)
    with pytest.raises(DomainError):
        order_preserving_quantize(WORKED, 0)
    with pytest.raises(DomainError):
        knn_quantize(WORKED, 17)
    with pytest.raises(DomainError):
        knn_quantize(np.full(17, 0.5), 1)


xhat_vec = st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=12)


@settings(max_examples=300, deadline=None)
@given(x=xhat_vec, data=st.data())
def test_order_preservation_property(x, data):
    x = np.array(x)
    k = data.draw(st.integers(1, len(x) + 1))
    out = order_preserving_quantize(x, k)
    greater = x[:, None] > x[None, :]
    for row in out:
        assert np.all((row[:, None] >= row[None, :]) | ~greater)


@settings(max_examples=200, deadline=None)
@given(x=st.lists(st.floats(1e-6, 1 - 1e-6), min_size=1, max_size=8), data=st.data())
def test_knn_distances_non_decreasing(x, data):
    x = np.array(x)
    k = data.draw(st.integers(1, 2 ** len(x)))
    out = knn_quantize(x, k)
    d = ((out - x) ** 2).sum(axis=1)
    assert np.all(np.diff(d) >= -1e-12)
    assert len({tuple(r) for r in out}) == k
