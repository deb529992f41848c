"""Exact null distribution and null moments of the count matrix.

Under the null hypothesis the labels are a uniformly random arrangement over
the fixed matching, so the law of the count matrix depends only on the group
sizes. Probabilities are kept as exact rationals; moments are closed forms.
"""

import csv
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial

import numpy as np

from ._validation import PreconditionError, check_sizes
from .counts import pair_index

MAX_ENUM_GROUPS = 4
MAX_ENUM_TOTAL = 24


@dataclass(frozen=True)
class NullMoments:
    """Null mean vector and covariance of the cross-count vector."""

    sizes: tuple
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class ConditionReport:
    min_eigenvalue: float
    condition_number: float
    ok: bool


@dataclass(frozen=True)
class ExactPmf:
    """Support matrices ``(M, K, K)`` with exact probabilities.

    ``probabilities`` holds :class:`fractions.Fraction` values;
    ``as_float()`` gives the float array.
    """

    sizes: tuple
    matrices: np.ndarray
    probabilities: tuple

    def as_float(self):
        return np.array([float(p) for p in self.probabilities])

    def cross_vectors(self):
        K = len(self.sizes)
        iu = pair_index(K)
        return self.matrices[:, iu[0], iu[1]]

    def to_csv(self, path_or_file):
        """Write one row per support matrix: flattened entries, probability."""
        K = len(self.sizes)
        header = [f"b{s + 1}{t + 1}" for s in range(K) for t in range(K)]
        own = isinstance(path_or_file, str)
        fh = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(fh)
            w.writerow(header + ["probability", "probability_exact"])
            for b, p in zip(self.matrices, self.probabilities):
                w.writerow([int(x) for x in b.ravel()]
                           + [repr(float(p)), f"{p.numerator}/{p.denominator}"])
        finally:
            if own:
                fh.close()


def _moment_sizes(sizes):
    sizes = check_sizes(sizes)
    n = sum(sizes)
    if n <= 3:
        raise PreconditionError(f"null moments need N >= 4, got N={n}")
    return sizes, n


def null_mean(sizes):
    """Entries ``N_s N_t / (N - 1)`` in cross-vector order."""
    sizes = check_sizes(sizes)
    n = sum(sizes)
    Ns = np.asarray(sizes, dtype=float)
    s, t = pair_index(len(sizes))
    return Ns[s] * Ns[t] / (n - 1)


def null_covariance(sizes):
    """Null covariance matrix of the cross-count vector (finite N).

    Three cases: variances, pairs sharing one group, and disjoint pairs.
    """
    sizes, n = _moment_sizes(sizes)
    K = len(sizes)
    if n == 4 and K >= 3:
        raise PreconditionError("covariance undefined for N=4 with K >= 3 "
                                "groups")
    Ns = [float(x) for x in sizes]
    s_idx, t_idx = pair_index(K)
    pairs = list(zip(s_idx.tolist(), t_idx.tolist()))
    m = len(pairs)
    n1, n3 = n - 1.0, n - 3.0
    cov = np.empty((m, m))
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            if i == j:
                e = Ns[a] * Ns[b] / n1
                v = (Ns[a] * Ns[b] * (Ns[a] - 1) * (Ns[b] - 1) / (n1 * n3)
                     + e * (1 - e))
            else:
                shared = {a, b} & {c, d}
                if shared:
                    (u,) = shared
                    (x,) = {a, b} - shared
                    (y,) = {c, d} - shared
                    v = (Ns[u] * (Ns[u] - 1) * Ns[x] * Ns[y] / (n1 * n3)
                         - Ns[u] ** 2 * Ns[x] * Ns[y] / n1 ** 2)
                else:
                    v = 2 * Ns[a] * Ns[b] * Ns[c] * Ns[d] / (n1 ** 2 * n3)
            cov[i, j] = v
    return cov


def null_moments(sizes):
    sizes = check_sizes(sizes)
    return NullMoments(sizes, null_mean(sizes), null_covariance(sizes))


def null_covariance_limit(proportions):
    """Limit of ``null_covariance(N p) / N`` as ``N`` grows.

    Entries: ``p_s p_t (1 - p_s - p_t + 2 p_s p_t)`` on the diagonal,
    ``p_u p_x p_y (2 p_u - 1)`` for pairs sharing group ``u``, and
    ``2 p_a p_b p_c p_d`` for disjoint pairs.
    """
    p = np.asarray(proportions, dtype=float)
    if p.ndim != 1 or len(p) < 2 or np.any(p <= 0) \
            or abs(p.sum() - 1) > 1e-9:
        raise ValueError("proportions must be positive and sum to 1")
    s_idx, t_idx = pair_index(len(p))
    pairs = list(zip(s_idx.tolist(), t_idx.tolist()))
    m = len(pairs)
    out = np.empty((m, m))
    for i, (a, b) in enumerate(pairs):
        for j, (c, d) in enumerate(pairs):
            if i == j:
                v = p[a] * p[b] * (1 - p[a] - p[b] + 2 * p[a] * p[b])
            else:
                shared = {a, b} & {c, d}
                if shared:
                    (u,) = shared
                    (x,) = {a, b} - shared
                    (y,) = {c, d} - shared
                    v = p[u] * p[x] * p[y] * (2 * p[u] - 1)
                else:
                    v = 2 * p[a] * p[b] * p[c] * p[d]
            out[i, j] = v
    return out


def mcm_moments(sizes):
    """Null mean and variance of the total cross count ``R``."""
    sizes, n = _moment_sizes(sizes)
    g1 = sum(sizes[s] * sizes[t] for s in range(len(sizes))
             for t in range(s + 1, len(sizes)))
    g2 = sum(m * (n - m) * (n - m - 1) for m in sizes) / 2
    e = g1 / (n - 1)
    var = e * (1 - e) + (g1 * g1 - g1 - 2 * g2) / ((n - 1) * (n - 3))
    return e, var


def covariance_condition_check(cov, max_condition=1e12):
    """Smallest eigenvalue and 2-norm condition number of a covariance."""
    cov = getattr(cov, "cov", cov)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    if cov.shape[0] != cov.shape[1]:
        raise ValueError("covariance must be square")
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ValueError("covariance is not symmetric")
    ev = np.linalg.eigvalsh(cov)
    lo, hi = float(ev[0]), float(ev[-1])
    cond = hi / lo if lo > 0 else np.inf
    return ConditionReport(lo, cond, bool(lo > 0 and cond <= max_condition))


def _check_enum_limits(sizes):
    sizes = check_sizes(sizes)
    if len(sizes) > MAX_ENUM_GROUPS or sum(sizes) > MAX_ENUM_TOTAL:
        raise PreconditionError(
            f"exact enumeration limited to K <= {MAX_ENUM_GROUPS} and "
            f"N <= {MAX_ENUM_TOTAL}, got sizes {sizes}; use permutation "
            "calibration instead")
    return sizes


def enumerate_support(sizes):
    """All symmetric count matrices compatible with the group sizes.

    Rows are filled in order; row ``s`` spends what is left of ``N_s``
    after the entries fixed by earlier rows on cross counts to later groups,
    and the even remainder goes to the diagonal.
    """
    sizes = _check_enum_limits(sizes)
    K = len(sizes)
    out = []
    b = np.zeros((K, K), dtype=np.int64)

    def fill_row(s, t, budget):
        # budget: part of N_s not yet assigned in row s
        if t == K:
            if budget % 2 == 0:
                b[s, s] = budget // 2
                if s == K - 1:
                    out.append(b.copy())
                else:
                    start(s + 1)
            return
        for x in range(budget + 1):
            b[s, t] = b[t, s] = x
            fill_row(s, t + 1, budget - x)
        b[s, t] = b[t, s] = 0

    def start(s):
        fill_row(s, s + 1, sizes[s] - int(b[s, :s].sum()))

    start(0)
    # later rows can overspend when earlier entries exceed N_t
    return [m for m in out if np.all(m >= 0)
            and np.array_equal(2 * np.diag(m) + m.sum(1) - np.diag(m),
                               np.asarray(sizes))]


def pmf_value(b, sizes):
    """Exact null probability of one count matrix."""
    b = np.asarray(b)
    K = len(sizes)
    n = sum(sizes)
    cross = sum(int(b[s, t]) for s in range(K) for t in range(s + 1, K))
    denom = 1
    for s in range(K):
        for t in range(s, K):
            denom *= factorial(int(b[s, t]))
    multinom = factorial(n)
    for m in sizes:
        multinom //= factorial(m)
    return Fraction(2 ** cross * factorial(n // 2), denom * multinom)


def exact_pmf(sizes):
    sizes = _check_enum_limits(sizes)
    mats = enumerate_support(sizes)
    probs = tuple(pmf_value(m, sizes) for m in mats)
    return ExactPmf(sizes, np.array(mats, dtype=np.int64), probs)


def multinomial_count(sizes):
    n = sum(sizes)
    out = 1
    for m in sizes:
        out *= comb(n, m)
        n -= m
    return out
