import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_array_equal

from crossmatch import counts, geometry


def test_count_matrix_examples():
    a = counts.count_matrix([[0, 1], [2, 3]], [0, 0, 1, 1])
    assert_array_equal(a, [[1, 0], [0, 1]])
    a = counts.count_matrix([[0, 2], [1, 3]], [0, 0, 1, 1])
    assert_array_equal(a, [[0, 2], [2, 0]])
    a = counts.count_matrix([[0, 1], [2, 3], [4, 5]], [0, 1, 1, 2, 2, 0])
    assert_array_equal(a, [[0, 1, 1], [1, 0, 1], [1, 1, 0]])


def test_count_matrix_length_mismatch():
    with pytest.raises(ValueError):
        counts.count_matrix([[0, 1]], [0, 0, 1])


def test_cross_vector_order():
    a = np.array([[0, 1, 2], [1, 0, 0], [2, 0, 0]])
    assert_array_equal(counts.cross_vector(a), [1, 2, 0])
    a = np.arange(16).reshape(4, 4)
    a = a + a.T
    assert_array_equal(counts.cross_vector(a),
                       [a[0, 1], a[0, 2], a[0, 3], a[1, 2], a[1, 3], a[2, 3]])
    assert_array_equal(counts.cross_vector([[0, 3], [3, 0]]), [3])


def test_cross_edge_total():
    assert counts.cross_edge_total(np.diag([2, 3])) == 0
    assert counts.cross_edge_total([[0, 5], [5, 0]]) == 5
    assert counts.cross_edge_total([[0, 1, 2], [1, 0, 0], [2, 0, 0]]) == 3


def test_mst_cross_total():
    path = [[0, 1], [1, 2]]
    assert counts.mst_cross_total(path, [0, 0, 0]) == 0
    assert counts.mst_cross_total(path, [0, 1, 0]) == 2
    star = [[0, 1], [0, 2], [0, 3], [0, 4]]
    assert counts.mst_cross_total(star, [0, 1, 1, 0, 0]) == 2


@settings(max_examples=80, deadline=None)
@given(st.integers(2, 4), st.integers(1, 8), st.integers(0, 2**31 - 1))
def test_count_invariants(K, half, seed):
    r = np.random.default_rng(seed)
    n = 2 * half
    labels = r.integers(0, K, size=n)
    pairs = r.permutation(n).reshape(-1, 2)
    a = counts.count_matrix(pairs, labels, K)
    Ns = np.bincount(labels, minlength=K)
    assert_array_equal(a, a.T)
    assert_array_equal(2 * np.diag(a) + a.sum(1) - np.diag(a), Ns)
    assert counts.cross_edge_total(a) + np.trace(a) == half
    # pair order and within-pair order do not matter
    shuffled = pairs[r.permutation(half)][:, ::-1]
    assert_array_equal(counts.count_matrix(shuffled, labels, K), a)
    # batch path agrees with the scalar path
    assert_array_equal(
        counts.batch_cross_vectors(pairs, labels[None, :], K)[0],
        counts.cross_vector(a))


def test_count_from_real_matching(rng):
    X = rng.normal(size=(30, 2))
    labels = np.repeat([0, 1, 2], 10)
    m = geometry.min_nonbipartite_matching(geometry.pairwise_distances(X))
    a = counts.count_matrix(m, labels)
    assert a.sum() - np.trace(a) + 2 * np.trace(a) == 30
