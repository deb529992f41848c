"""Estimator-style wrapper around :func:`crossmatch.stattests.run_test`."""

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .stattests import run_test


class CrossMatchTest(BaseEstimator):
    """K-sample matching (or MST) test as a fit-once estimator.

    Parameters
    ----------
    method : {"mmcm", "mcm", "mfrt"}
    calibration : {"asymptotic", "exact", "permutation"}
    n_permutations : int
        Number of label permutations for permutation calibration.
    metric : {"euclidean", "manhattan", "precomputed"}
        With ``"precomputed"``, ``X`` passed to :meth:`fit` is the N x N
        distance matrix.
    standardize : bool
        Scale features to unit variance before computing distances.
    alpha : float
        Level used by the pairwise class-selection table.
    correction : {"bh", "bonferroni"}
    random_state : int
        Seed for the permutation streams and the odd-N policy.
    n_jobs : int

    Attributes
    ----------
    result_ : TestResult
    statistic_, pvalue_ : float
    count_matrix_ : ndarray of shape (K, K)
    classes_ : ndarray of shape (K,)
    """

    def __init__(self, method="mmcm", calibration="asymptotic",
                 n_permutations=1000, metric="euclidean", standardize=False,
                 alpha=0.05, correction="bh", random_state=0, n_jobs=1):
        self.method = method
        self.calibration = calibration
        self.n_permutations = n_permutations
        self.metric = metric
        self.standardize = standardize
        self.alpha = alpha
        self.correction = correction
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, y):
        precomputed = self.metric == "precomputed"
        X = check_array(X, dtype=float)
        res = run_test(
            X, y, method=self.method, calibration=self.calibration,
            metric="euclidean" if precomputed else self.metric,
            standardize=self.standardize, precomputed=precomputed,
            n_permutations=self.n_permutations,
            seed=0 if self.random_state is None else self.random_state,
            alpha=self.alpha, correction=self.correction, n_jobs=self.n_jobs)
        self.result_ = res
        self.statistic_ = res.statistic
        self.pvalue_ = res.p_value
        self.count_matrix_ = res.count_matrix
        self.classes_ = res.classes
        self.n_features_in_ = X.shape[1]
        return self

    def reject(self, alpha=None):
        """Whether the null is rejected at ``alpha`` (default ``self.alpha``)."""
        check_is_fitted(self, "result_")
        return self.pvalue_ <= (self.alpha if alpha is None else alpha)
