import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from crossmatch import CrossMatchTest, geometry, run_test


def test_estimator_matches_functional(rng):
    X = rng.normal(size=(40, 3))
    y = np.repeat(["a", "b", "c", "d"], 10)
    est = CrossMatchTest(method="mmcm").fit(X, y)
    ref = run_test(X, y, "mmcm")
    assert est.pvalue_ == ref.p_value
    assert est.statistic_ == ref.statistic
    assert list(est.classes_) == ["a", "b", "c", "d"]
    assert est.count_matrix_.shape == (4, 4)
    assert est.n_features_in_ == 3


def test_estimator_params_and_clone():
    est = CrossMatchTest(method="mcm", n_permutations=50, random_state=3)
    params = est.get_params()
    assert params["method"] == "mcm" and params["n_permutations"] == 50
    c = clone(est).set_params(method="mfrt")
    assert c.method == "mfrt" and est.method == "mcm"


def test_precomputed(rng):
    X = rng.normal(size=(20, 2))
    y = np.repeat([0, 1], 10)
    D = geometry.pairwise_distances(X)
    a = CrossMatchTest(metric="precomputed").fit(D, y)
    b = CrossMatchTest().fit(X, y)
    assert a.pvalue_ == b.pvalue_


def test_reject_and_not_fitted(rng):
    est = CrossMatchTest()
    with pytest.raises(NotFittedError):
        est.reject()
    X = np.r_[rng.normal(size=(30, 2)), rng.normal(size=(30, 2)) + 8]
    est.fit(X, np.repeat([0, 1], 30))
    assert est.reject()
    assert est.reject(alpha=1e-300) is False or est.pvalue_ <= 1e-300


def test_permutation_estimator_reproducible(rng):
    X = rng.normal(size=(30, 2))
    y = np.repeat([0, 1, 2], 10)
    a = CrossMatchTest(calibration="permutation", n_permutations=99,
                       random_state=7).fit(X, y)
    b = CrossMatchTest(calibration="permutation", n_permutations=99,
                       random_state=7).fit(X, y)
    assert a.pvalue_ == b.pvalue_
