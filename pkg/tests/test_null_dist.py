import io
from collections import Counter
from fractions import Fraction
from itertools import permutations

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from crossmatch import counts, null_dist
from crossmatch._validation import PreconditionError
from crossmatch.stattests import all_labelings


def labeling_pmf(sizes):
    """Count-matrix law from every labeling over the fixed matching
    (0,1), (2,3), ... (the oracle; uses no closed form)."""
    K = len(sizes)
    n = sum(sizes)
    pairs = np.arange(n).reshape(-1, 2)
    base = np.repeat(np.arange(K), sizes)
    seen = Counter()
    for perm in set(permutations(base.tolist())):
        a = counts.count_matrix(pairs, np.array(perm), K)
        seen[a.tobytes()] += 1
    total = sum(seen.values())
    return {k: Fraction(v, total) for k, v in seen.items()}


def test_pmf_22_by_labelings():
    ref = labeling_pmf((2, 2))
    assert len(ref) == 2
    pmf = null_dist.exact_pmf((2, 2))
    got = {m.tobytes(): p for m, p in zip(pmf.matrices, pmf.probabilities)}
    assert got == ref
    by_a12 = {int(m[0, 1]): p for m, p in zip(pmf.matrices, pmf.probabilities)}
    assert by_a12 == {2: Fraction(2, 3), 0: Fraction(1, 3)}


@pytest.mark.parametrize("sizes", [(2, 2, 2), (3, 3), (4, 2, 2), (2, 2, 1, 1)])
def test_pmf_matches_labelings(sizes):
    pmf = null_dist.exact_pmf(sizes)
    got = {m.tobytes(): p for m, p in zip(pmf.matrices, pmf.probabilities)}
    assert got == labeling_pmf(sizes)


def test_support_examples():
    sup = null_dist.enumerate_support((2, 2))
    assert sorted(m.tolist() for m in sup) == [[[0, 2], [2, 0]],
                                              [[1, 0], [0, 1]]]
    assert [m.tolist() for m in null_dist.enumerate_support((1, 1))] == \
        [[[0, 1], [1, 0]]]
    for m in null_dist.enumerate_support((2, 2, 2)):
        assert_array_equal(2 * np.diag(m) + m.sum(1) - np.diag(m), [2, 2, 2])


def test_enumeration_guards():
    with pytest.raises(PreconditionError):
        null_dist.exact_pmf((2, 2, 2, 2, 2))
    with pytest.raises(PreconditionError):
        null_dist.enumerate_support((14, 12))
    with pytest.raises(PreconditionError):
        null_dist.exact_pmf((2, 3))


@pytest.mark.parametrize("sizes", [(2, 2), (4, 4), (2, 2, 2), (4, 2, 2),
                                   (3, 5), (6, 4, 2), (4, 4, 4, 4), (5, 5, 1, 1)])
def test_pmf_moments_match_closed_forms(sizes):
    pmf = null_dist.exact_pmf(sizes)
    assert sum(pmf.probabilities) == 1
    V = pmf.cross_vectors()
    P = pmf.probabilities
    m = len(V[0])
    mean = [sum(p * int(v[i]) for p, v in zip(P, V)) for i in range(m)]
    cov = [[sum(p * (int(v[i]) - mean[i]) * (int(v[j]) - mean[j])
                for p, v in zip(P, V)) for j in range(m)] for i in range(m)]
    assert_allclose(null_dist.null_mean(sizes), [float(x) for x in mean],
                    atol=1e-10)
    assert_allclose(null_dist.null_covariance(sizes),
                    np.array(cov, dtype=float), atol=1e-10)
    R = [sum(int(x) for x in v) for v in V]
    eR = sum(p * r for p, r in zip(P, R))
    vR = sum(p * (r - eR) ** 2 for p, r in zip(P, R))
    e, var = null_dist.mcm_moments(sizes)
    assert_allclose([e, var], [float(eR), float(vR)], atol=1e-10)


def test_moment_examples():
    assert_allclose(null_dist.null_mean((2, 2)), [4 / 3])
    assert_allclose(null_dist.null_mean((2, 2, 2))[0], 0.8)
    assert_allclose(null_dist.null_covariance((2, 2)), [[8 / 9]])
    assert_allclose(null_dist.null_covariance((2, 2, 2))[0, 1], -8 / 75)
    assert_allclose(null_dist.mcm_moments((2, 2)), (4 / 3, 8 / 9))
    assert_allclose(null_dist.mcm_moments((2, 2, 2)), (2.4, 0.64))
    assert_allclose(null_dist.mcm_moments((3, 5, 8)),
                    null_dist.mcm_moments((8, 3, 5)))
    C = null_dist.null_covariance((7, 3, 5, 9))
    assert_array_equal(C, C.T)
    assert_allclose(null_dist.null_mean((3, 9)), null_dist.null_mean((9, 3)))


def test_covariance_preconditions():
    with pytest.raises(PreconditionError):
        null_dist.null_covariance((1, 1))
    with pytest.raises(PreconditionError):
        null_dist.null_covariance((2, 1, 1))
    with pytest.raises(PreconditionError):
        null_dist.mcm_moments((1, 1))


def test_covariance_limit():
    p = np.array([0.2, 0.3, 0.5])
    L = null_dist.null_covariance_limit(p)
    prev = None
    for n in (1000, 2000, 4000):
        err = np.abs(null_dist.null_covariance(tuple((p * n).astype(int))) / n
                     - L).max()
        if prev is not None:
            assert err < 0.6 * prev  # O(1/N)
        prev = err
    assert prev < 1e-3


def test_covariance_scaling_between_n_and_2n():
    a = null_dist.null_covariance((100, 200, 300)) / 600
    b = null_dist.null_covariance((200, 400, 600)) / 1200
    assert np.abs(a - b).max() < 5 / 600


def test_condition_check():
    rep = null_dist.covariance_condition_check(null_dist.null_moments((100, 100)))
    assert rep.ok and rep.min_eigenvalue > 0
    rep = null_dist.covariance_condition_check(null_dist.null_covariance((50, 50, 50)))
    assert rep.ok and rep.min_eigenvalue > 0
    assert null_dist.covariance_condition_check(np.eye(3)).condition_number == 1
    assert not null_dist.covariance_condition_check(np.diag([1.0, 0.0])).ok
    with pytest.raises(ValueError):
        null_dist.covariance_condition_check([[1.0, 0.5], [0.0, 1.0]])


def test_pmf_csv_export():
    buf = io.StringIO()
    null_dist.exact_pmf((2, 2)).to_csv(buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "b11,b12,b21,b22,probability,probability_exact"
    assert "0,2,2,0,0.6666666666666666,2/3" in lines


def test_pmf_vs_random_labelings(rng):
    # chi-square GOF of 1e5 label permutations over a fixed matching
    sizes = (4, 4, 2)
    pmf = null_dist.exact_pmf(sizes)
    base = np.repeat(np.arange(3), sizes)
    pairs = np.arange(10).reshape(-1, 2)
    L = np.array([rng.permutation(base) for _ in range(100_000)])
    V = counts.batch_cross_vectors(pairs, L, 3)
    keys = {tuple(v): i for i, v in enumerate(pmf.cross_vectors().tolist())}
    obs = np.bincount([keys[tuple(v)] for v in V.tolist()],
                      minlength=len(keys))
    exp = pmf.as_float() * len(L)
    assert stats.chisquare(obs, exp).pvalue > 0.001


def test_all_labelings_count():
    rows = all_labelings((2, 2, 1))
    assert len(rows) == 30
    assert len({r.tobytes() for r in rows}) == 30
