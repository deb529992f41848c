"""MCM, MMCM and MFRT statistics with asymptotic, exact and permutation
calibration, plus pairwise class selection."""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy import linalg, stats

from . import geometry
from ._validation import (NumericalError, PreconditionError,
                          check_distance_matrix, encode_labels)
from .counts import (batch_cross_vectors, count_matrix, cross_vector,
                     pair_index)
from .null_dist import (_check_enum_limits, covariance_condition_check,
                        exact_pmf, mcm_moments, multinomial_count,
                        null_moments)

METHODS = ("mcm", "mmcm", "mfrt")
CALIBRATIONS = ("asymptotic", "exact", "permutation")
# Relative slack when comparing real-valued statistics for "at least as
# extreme"; absorbs rounding in the Mahalanobis form.
_STAT_RTOL = 1e-9
_MAX_EXHAUSTIVE = 2_000_000


@dataclass
class PairwiseTable:
    """Per-pair standardized cross counts with adjusted lower-tail p-values.

    ``pairs`` are group codes; ``selected_class`` is the code common to all
    rejected pairs, or ``None``.
    """

    pairs: list
    z: list
    p_raw: list
    p_adjusted: list
    reject: list
    correction: str
    alpha: float
    selected_class: object = None


@dataclass
class TestResult:
    __test__ = False  # keep pytest from collecting this class

    statistic: float
    p_value: float
    method: str
    calibration: str
    df: object = None
    count_matrix: object = None
    expected_counts: object = None
    permutations: object = None
    seed: object = None
    sizes: object = None
    classes: object = None
    dropped_index: object = None
    pairwise: object = None
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        for key in ("count_matrix", "expected_counts", "classes", "sizes"):
            if d[key] is not None:
                d[key] = np.asarray(d[key]).tolist()
        if self.pairwise is not None and self.classes is not None:
            cls = np.asarray(self.classes).tolist()
            pw = d["pairwise"]
            pw["pairs"] = [[cls[s], cls[t]] for s, t in pw["pairs"]]
            if pw["selected_class"] is not None:
                pw["selected_class"] = cls[pw["selected_class"]]
        return d

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), default=_json_default, **kw)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


class _Mahalanobis:
    """Cholesky factor of a null covariance, reused across many vectors."""

    def __init__(self, nm):
        self.mean = np.asarray(nm.mean, dtype=float)
        try:
            self.chol = linalg.cho_factor(nm.cov, lower=True)
        except linalg.LinAlgError as exc:
            rep = covariance_condition_check(nm.cov)
            raise NumericalError(
                f"null covariance not positive definite (min eigenvalue "
                f"{rep.min_eigenvalue:.3g}, condition {rep.condition_number:.3g})"
            ) from exc

    def __call__(self, v):
        r = np.asarray(v, dtype=float) - self.mean
        return float(r @ linalg.cho_solve(self.chol, r))

    def many(self, V):
        """Statistic for each row of ``V``, computed row by row on unique
        rows so that equal count vectors give bit-identical values."""
        V = np.asarray(V)
        uniq, inv = np.unique(V, axis=0, return_inverse=True)
        vals = np.array([self(u) for u in uniq])
        return vals[inv.ravel()]


def mmcm_statistic(v, nm):
    """Mahalanobis distance of the cross counts from their null mean."""
    return _Mahalanobis(nm)(v)


def mcm_statistic(v, sizes):
    """Standardized total cross count."""
    e, var = mcm_moments(sizes)
    if not var > 0:
        raise NumericalError(f"null variance of R is {var}")
    return (float(np.sum(v)) - e) / np.sqrt(var)


def asymptotic_pvalue_mmcm(S, K):
    return float(stats.chi2.sf(S, K * (K - 1) // 2))


def asymptotic_pvalue_mcm(Q):
    return float(stats.norm.cdf(Q))


def _upper(values, observed):
    return values >= observed - _STAT_RTOL * max(1.0, abs(observed))


def _lower(values, observed):
    return values <= observed + _STAT_RTOL * max(1.0, abs(observed))


def exact_pvalue_fraction(sizes, observed, statistic="mmcm"):
    """Exact null tail probability as a :class:`~fractions.Fraction`."""
    sizes = _check_enum_limits(sizes)
    pmf = exact_pmf(sizes)
    V = pmf.cross_vectors()
    if statistic == "mmcm":
        vals = _Mahalanobis(null_moments(sizes)).many(V)
        hit = _upper(vals, observed)
    elif statistic == "mcm-raw":
        hit = _lower(V.sum(axis=1).astype(float), observed)
    else:
        raise ValueError(f"unknown statistic {statistic!r}")
    return sum((p for p, h in zip(pmf.probabilities, hit) if h), Fraction(0))


def exact_pvalue(sizes, observed, statistic="mmcm"):
    """P(S >= observed) for ``"mmcm"``, P(R <= observed) for ``"mcm-raw"``."""
    return float(exact_pvalue_fraction(sizes, observed, statistic))


def bh_adjust(p):
    """Benjamini-Hochberg step-up adjusted p-values."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or np.any(~(p >= 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    if len(p) == 0:
        return p
    return stats.false_discovery_control(p, method="bh")


def bonferroni_adjust(p):
    p = np.asarray(p, dtype=float)
    if np.any(~(p >= 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    return np.minimum(1.0, p * len(p))


def pairwise_class_selection(v, nm, correction="bh", alpha=0.05):
    """Test every pair of groups with its standardized cross count.

    A pair is rejected when its adjusted lower-tail p-value is at most
    ``alpha``. The selected class is the single group appearing in every
    rejected pair, if there is exactly one.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    adjust = {"bh": bh_adjust, "bonferroni": bonferroni_adjust}.get(correction)
    if adjust is None:
        raise ValueError(f"unknown correction {correction!r}")
    v = np.asarray(v, dtype=float)
    sd = np.sqrt(np.diag(np.atleast_2d(nm.cov)))
    z = (v - nm.mean) / sd
    p = stats.norm.cdf(z)
    adj = np.maximum(adjust(p), p)
    reject = adj <= alpha
    K = len(nm.sizes)
    s_idx, t_idx = pair_index(K)
    pairs = [(int(s), int(t)) for s, t in zip(s_idx, t_idx)]
    common = None
    for pr, r in zip(pairs, reject):
        if r:
            common = set(pr) if common is None else common & set(pr)
    selected = next(iter(common)) if common and len(common) == 1 else None
    return PairwiseTable(pairs, z.tolist(), p.tolist(), adj.tolist(),
                         reject.tolist(), correction, alpha, selected)


def _replicate_rng(seed, b):
    # Philox keyed by (seed, replicate index): a replicate's stream does not
    # depend on how replicates are split across workers.
    key = (int(b) << 64) | (int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def permuted_labels(labels, B, seed, start=0):
    labels = np.asarray(labels)
    out = np.empty((B, len(labels)), dtype=labels.dtype)
    for i in range(B):
        out[i] = _replicate_rng(seed, start + i).permutation(labels)
    return out


def all_labelings(sizes):
    """Every distinct assignment of group codes with the given sizes."""
    n = sum(sizes)
    total = multinomial_count(sizes)
    if total > _MAX_EXHAUSTIVE:
        raise PreconditionError(f"{total} labelings exceed the exhaustive "
                                f"limit {_MAX_EXHAUSTIVE}")
    out = np.empty((total, n), dtype=np.int64)
    row = 0

    def rec(free, g, cur):
        nonlocal row
        if g == len(sizes) - 1:
            cur[list(free)] = g
            out[row] = cur
            row += 1
            return
        for chosen in combinations(free, sizes[g]):
            cur[list(chosen)] = g
            rec([i for i in free if i not in set(chosen)], g + 1, cur)

    rec(list(range(n)), 0, np.empty(n, dtype=np.int64))
    return out


class _StatEngine:
    """Statistic of a labeling over a fixed graph (matching or MST)."""

    def __init__(self, D, method, codes, K, graph=None):
        self.method = method
        self.K = K
        sizes = tuple(np.bincount(codes, minlength=K).tolist())
        self.sizes = sizes
        if graph is None:
            graph = (geometry.minimum_spanning_tree(D) if method == "mfrt"
                     else geometry.min_nonbipartite_matching(D))
        self.graph = graph
        if method == "mfrt":
            self.lower = True
        else:
            self.lower = method == "mcm"
            if method == "mmcm":
                self.maha = _Mahalanobis(null_moments(sizes))

    def values(self, label_rows):
        label_rows = np.atleast_2d(label_rows)
        if self.method == "mfrt":
            e = self.graph.edges
            return np.count_nonzero(label_rows[:, e[:, 0]]
                                    != label_rows[:, e[:, 1]],
                                    axis=1).astype(float)
        V = batch_cross_vectors(self.graph.pairs, label_rows, self.K)
        if self.method == "mcm":
            return V.sum(axis=1).astype(float)
        return self.maha.many(V)

    def extreme(self, vals, observed):
        return _lower(vals, observed) if self.lower else _upper(vals, observed)


def _count_extreme(engine, codes, observed, B, seed, n_jobs, chunk=256):
    starts = list(range(0, B, chunk))

    def work(s):
        rows = permuted_labels(codes, min(chunk, B - s), seed, start=s)
        return int(np.count_nonzero(engine.extreme(engine.values(rows),
                                                   observed)))

    if n_jobs and n_jobs > 1 and len(starts) > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            return sum(ex.map(work, starts))
    return sum(work(s) for s in starts)


def permutation_test(D, labels, method="mmcm", n_permutations=1000, seed=0,
                     exhaustive=False, n_jobs=1):
    """Permutation-calibrated test on a precomputed distance matrix.

    The graph is built once on the pooled sample and labels are permuted.
    With ``exhaustive=True`` every distinct labeling is visited once and the
    p-value is the exact fraction of labelings at least as extreme as the
    observed one (no add-one term, since the observed labeling is among
    them). Otherwise ``p = (1 + #extreme) / (B + 1)``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    D = check_distance_matrix(D)
    codes, classes = encode_labels(labels)
    if len(codes) != D.shape[0]:
        raise ValueError(f"{len(codes)} labels for {D.shape[0]} points")
    K = len(classes)
    engine = _StatEngine(D, method, codes, K)
    observed = float(engine.values(codes)[0])
    if exhaustive:
        rows = all_labelings(engine.sizes)
        hits = int(np.count_nonzero(engine.extreme(engine.values(rows),
                                                   observed)))
        p = float(Fraction(hits, len(rows)))
        B = len(rows)
    else:
        B = int(n_permutations)
        if B < 1:
            raise ValueError("number of permutations must be >= 1")
        hits = _count_extreme(engine, codes, observed, B, seed, n_jobs)
        p = (1 + hits) / (B + 1)
    a = None
    if method != "mfrt":
        a = count_matrix(engine.graph, codes, K)
    return TestResult(
        statistic=observed, p_value=p, method=method,
        calibration="permutation", count_matrix=a,
        permutations=B, seed=None if exhaustive else seed,
        sizes=engine.sizes, classes=classes,
        extra={"exhaustive": bool(exhaustive)})


def run_test(data, labels, method="mmcm", calibration="asymptotic",
             metric="euclidean", standardize=False, precomputed=False,
             n_permutations=1000, seed=0, alpha=0.05, correction="bh",
             n_jobs=1):
    """End-to-end test from points (or a distance matrix) and labels.

    When ``N`` is odd one point is removed by :func:`geometry.apply_odd_policy`
    (matching methods only) and its index is stored in ``dropped_index``.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if calibration not in CALIBRATIONS:
        raise ValueError(f"unknown calibration {calibration!r}")
    if method == "mfrt" and calibration != "permutation":
        raise PreconditionError("mfrt is only calibrated by permutation")
    if precomputed:
        D = check_distance_matrix(data)
    else:
        D = geometry.pairwise_distances(data, metric, standardize)
    codes, classes = encode_labels(labels)
    if len(codes) != D.shape[0]:
        raise ValueError(f"{len(codes)} labels for {D.shape[0]} points")
    K = len(classes)

    dropped = None
    if method != "mfrt" and len(codes) % 2:
        dropped = geometry.apply_odd_policy(codes, seed)
        keep = np.arange(len(codes)) != dropped
        D, codes = D[np.ix_(keep, keep)], codes[keep]
        if np.bincount(codes, minlength=K).min() == 0:
            raise PreconditionError("odd-N policy emptied a group")

    if calibration == "permutation":
        res = permutation_test(D, codes, method, n_permutations, seed,
                               n_jobs=n_jobs)
        res.classes, res.dropped_index = classes, dropped
        if method != "mfrt" and sum(res.sizes) >= 4 \
                and not (sum(res.sizes) == 4 and K >= 3):
            nm = null_moments(res.sizes)
            res.expected_counts = nm.mean
            res.pairwise = pairwise_class_selection(
                cross_vector(res.count_matrix), nm, correction, alpha)
        return res

    sizes = tuple(np.bincount(codes, minlength=K).tolist())
    match = geometry.min_nonbipartite_matching(D)
    a = count_matrix(match, codes, K)
    v = cross_vector(a)
    if calibration == "exact":
        _check_enum_limits(sizes)
    small = sum(sizes) < 4 or (sum(sizes) == 4 and K >= 3)
    nm = None if small else null_moments(sizes)
    df = None
    if method == "mmcm":
        if calibration == "exact":
            stat = mmcm_statistic(v, nm) if nm is not None else 0.0
            p = 1.0 if nm is None else exact_pvalue(sizes, stat, "mmcm")
        else:
            if nm is None:
                raise PreconditionError("asymptotic calibration needs N >= 4"
                                        " (N >= 6 when K >= 3)")
            stat = mmcm_statistic(v, nm)
            df = K * (K - 1) // 2
            p = asymptotic_pvalue_mmcm(stat, K)
    else:
        if calibration == "exact":
            stat = float(v.sum())
            p = exact_pvalue(sizes, stat, "mcm-raw")
        else:
            if sum(sizes) < 4:
                raise PreconditionError("asymptotic calibration needs N >= 4")
            stat = mcm_statistic(v, sizes)
            p = asymptotic_pvalue_mcm(stat)
    pairwise = None
    if nm is not None:
        pairwise = pairwise_class_selection(v, nm, correction, alpha)
    return TestResult(
        statistic=float(stat), p_value=float(min(max(p, 0.0), 1.0)),
        method=method, calibration=calibration, df=df, count_matrix=a,
        expected_counts=None if nm is None else nm.mean, sizes=sizes,
        classes=classes, dropped_index=dropped, pairwise=pairwise,
        extra={"matching_weight": match.weight})
