"""Distance matrices, minimum non-bipartite matching and the MST."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from ._blossom import min_cost_perfect_matching_dense
from ._validation import PreconditionError, check_distance_matrix, check_points

# Distances are rounded to integers with this many units for the largest
# entry before running the blossom kernel (exact integer arithmetic).
_MATCHING_RESOLUTION = 2**40
_BRUTE_FORCE_LIMIT = 12

_METRICS = {"euclidean": "euclidean", "manhattan": "cityblock"}


@dataclass(frozen=True)
class Matching:
    """A perfect matching stored as an ``(N/2, 2)`` array of index pairs.

    Pairs are sorted with ``i < j`` inside each row and rows ordered
    lexicographically, so equal matchings compare equal.
    """

    pairs: np.ndarray
    weight: float

    @property
    def n(self):
        return 2 * len(self.pairs)

    def mate(self):
        mate = np.empty(self.n, dtype=np.int64)
        mate[self.pairs[:, 0]] = self.pairs[:, 1]
        mate[self.pairs[:, 1]] = self.pairs[:, 0]
        return mate


@dataclass(frozen=True)
class EdgeList:
    edges: np.ndarray
    total_weight: float


def _canonical_pairs(pairs):
    pairs = np.sort(np.asarray(pairs, dtype=np.int64).reshape(-1, 2), axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0]))
    return pairs[order]


def _pairs_weight(D, pairs):
    return float(np.sum(D[pairs[:, 0], pairs[:, 1]]))


def pairwise_distances(X, metric="euclidean", standardize=False):
    """Dense distance matrix of the rows of ``X``.

    ``metric`` is ``"euclidean"`` or ``"manhattan"``. With ``standardize``
    each feature is centred and scaled to unit variance first (constant
    features are left centred only).
    """
    X = check_points(X)
    if metric not in _METRICS:
        raise ValueError(f"unknown metric {metric!r}; "
                         f"choose from {sorted(_METRICS)}")
    if standardize:
        X = X - X.mean(axis=0)
        sd = X.std(axis=0)
        X = X / np.where(sd > 0, sd, 1.0)
    D = cdist(X, X, metric=_METRICS[metric])
    np.fill_diagonal(D, 0.0)
    return D


def min_nonbipartite_matching(D):
    """Minimum-weight perfect matching of the complete graph on ``D``.

    Solved exactly with a primal-dual blossom algorithm on integer-rounded
    weights (largest distance mapped to 2**40 units). Returns a
    :class:`Matching` whose ``weight`` is summed from the float distances.
    """
    D = check_distance_matrix(D)
    n = D.shape[0]
    if n % 2:
        raise PreconditionError(
            f"matching needs an even number of points, got {n}; "
            "apply the odd-N policy first")
    top = float(D.max())
    if top == 0.0:
        cost = np.zeros(D.shape, dtype=np.int64)
    else:
        cost = np.rint(D * (_MATCHING_RESOLUTION / top)).astype(np.int64)
    mate = min_cost_perfect_matching_dense(cost)
    if np.any(mate < 0) or np.any(mate[mate] != np.arange(n)):
        raise RuntimeError("blossom kernel returned an invalid matching")
    idx = np.arange(n)
    pairs = _canonical_pairs(np.column_stack([idx, mate])[idx < mate])
    return Matching(pairs, _pairs_weight(D, pairs))


def brute_force_matching(D):
    """Exhaustive minimum-weight perfect matching for ``N <= 12``.

    Enumerates all (N-1)!! matchings by recursion on the lowest unmatched
    index. Ties keep the first matching met in that order.
    """
    D = check_distance_matrix(D)
    n = D.shape[0]
    if n % 2:
        raise PreconditionError(f"N must be even, got {n}")
    if n > _BRUTE_FORCE_LIMIT:
        raise PreconditionError(
            f"brute force refused for N={n} > {_BRUTE_FORCE_LIMIT}")
    best_weight = np.inf
    best = None

    def search(remaining, acc, chosen):
        nonlocal best_weight, best
        if not remaining:
            if acc < best_weight:
                best_weight, best = acc, list(chosen)
            return
        i = remaining[0]
        for k in range(1, len(remaining)):
            j = remaining[k]
            chosen.append((i, j))
            search(remaining[1:k] + remaining[k + 1:], acc + D[i, j], chosen)
            chosen.pop()

    search(list(range(n)), 0.0, [])
    pairs = _canonical_pairs(best)
    return Matching(pairs, _pairs_weight(D, pairs))


def minimum_spanning_tree(D):
    """Minimum spanning tree of the complete graph on ``D`` (dense Prim).

    Zero distances are ordinary edges, unlike sparse-graph MST routines that
    read zeros as missing edges.
    """
    D = check_distance_matrix(D)
    n = D.shape[0]
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = D[0].copy()
    parent = np.zeros(n, dtype=np.int64)
    edges = np.empty((n - 1, 2), dtype=np.int64)
    for k in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        v = int(np.argmin(cand))
        edges[k] = (parent[v], v)
        in_tree[v] = True
        closer = (D[v] < best) & ~in_tree
        best[closer] = D[v][closer]
        parent[closer] = v
    edges = _canonical_pairs(edges)
    return EdgeList(edges, _pairs_weight(D, edges))


def apply_odd_policy(labels, seed=None):
    """Pick one index to drop when the pooled sample size is odd.

    The index is drawn uniformly from the largest group (lowest group code
    on ties). Returns ``None`` when ``N`` is already even.
    """
    labels = np.asarray(labels)
    if len(labels) % 2 == 0:
        return None
    groups, counts = np.unique(labels, return_counts=True)
    target = groups[int(np.argmax(counts))]
    members = np.flatnonzero(labels == target)
    rng = np.random.default_rng(seed)
    return int(members[rng.integers(len(members))])
