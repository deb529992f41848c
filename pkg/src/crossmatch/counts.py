"""Cross/pure count matrices from a matching or spanning tree.

Groups are coded ``0..K-1`` throughout the package. The cross-count vector
orders pairs row by row from the upper triangle,
``(0,1), (0,2), ..., (0,K-1), (1,2), ..., (K-2,K-1)``, and
:func:`pair_index` is the only place that ordering is defined.
"""

import numpy as np


def pair_index(K):
    """Upper-triangle index pairs ``(s, t)``, ``s < t``, in vector order."""
    return np.triu_indices(K, k=1)


def _as_pairs(matching):
    pairs = getattr(matching, "pairs", matching)
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("expected an (M, 2) array of index pairs")
    return pairs


def count_matrix(matching, labels, K=None):
    """Symmetric K x K matrix of pure (diagonal) and cross counts.

    ``labels`` are group codes ``0..K-1``. Each matched pair contributes one
    to ``a[s, s]`` when both ends share group ``s``; a cross pair adds one to
    both ``a[s, t]`` and ``a[t, s]``.
    """
    pairs = _as_pairs(matching)
    labels = np.asarray(labels, dtype=np.int64)
    if 2 * len(pairs) != len(labels):
        raise ValueError(f"matching has {2 * len(pairs)} endpoints but "
                         f"there are {len(labels)} labels")
    if len(np.unique(pairs)) != len(labels) or pairs.min() < 0 \
            or pairs.max() >= len(labels):
        raise ValueError("matching does not cover the labeled indices")
    if K is None:
        K = int(labels.max()) + 1
    ls, lt = labels[pairs[:, 0]], labels[pairs[:, 1]]
    a = np.zeros((K, K), dtype=np.int64)
    np.add.at(a, (ls, lt), 1)
    a = a + a.T
    a[np.diag_indices(K)] //= 2
    return a


def cross_vector(a):
    a = np.asarray(a)
    return a[pair_index(a.shape[0])]


def cross_edge_total(a):
    a = np.asarray(a)
    return int(np.sum(np.triu(a, k=1)))


def mst_cross_total(edges, labels):
    """Number of spanning-tree edges joining two different groups."""
    e = _as_pairs(getattr(edges, "edges", edges))
    labels = np.asarray(labels)
    return int(np.count_nonzero(labels[e[:, 0]] != labels[e[:, 1]]))


def batch_cross_vectors(pairs, label_rows, K):
    """Cross-count vectors for many labelings of one matching.

    ``label_rows`` has shape ``(B, N)``; returns a ``(B, K(K-1)/2)`` integer
    array. Used by the permutation engines.
    """
    pairs = _as_pairs(pairs)
    L = np.asarray(label_rows, dtype=np.int64)
    s = L[:, pairs[:, 0]]
    t = L[:, pairs[:, 1]]
    lo, hi = np.minimum(s, t), np.maximum(s, t)
    # code of pair (lo, hi) within the upper-triangle ordering
    code = lo * K - lo * (lo + 1) // 2 + (hi - lo - 1)
    code = np.where(lo == hi, -1, code)
    m = K * (K - 1) // 2
    B = L.shape[0]
    flat = (np.arange(B)[:, None] * m + code)[code >= 0]
    return np.bincount(flat, minlength=B * m).reshape(B, m)
