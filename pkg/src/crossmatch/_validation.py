"""Input checks shared by the functional API and the estimators."""

import numpy as np


class PreconditionError(ValueError):
    """An input is well formed but outside the domain of an operation."""


class NumericalError(ArithmeticError):
    """A numerical step (solve, normalization) failed."""


def check_points(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"points must be a 2-d array, got ndim={X.ndim}")
    if X.shape[0] < 2 or X.shape[1] < 1:
        raise ValueError(f"need at least 2 points in >= 1 dimension, got "
                         f"shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("points contain non-finite entries")
    return X


def check_distance_matrix(D, atol=1e-9):
    """Validate a square, symmetric, nonnegative, zero-diagonal matrix.

    Asymmetry up to ``atol`` (relative to the largest entry) is repaired by
    averaging with the transpose.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"distance matrix must be square, got {D.shape}")
    if D.shape[0] < 2:
        raise ValueError("distance matrix needs at least 2 rows")
    if not np.all(np.isfinite(D)):
        raise ValueError("distance matrix contains non-finite entries")
    if np.any(D < 0):
        raise ValueError("distance matrix contains negative entries")
    scale = max(float(D.max()), 1.0)
    if np.max(np.abs(D - D.T)) > atol * scale:
        raise ValueError("distance matrix is not symmetric")
    if np.any(np.diag(D) != 0):
        if np.max(np.abs(np.diag(D))) > atol * scale:
            raise ValueError("distance matrix has a nonzero diagonal")
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    return D


def encode_labels(y):
    """Map arbitrary class labels to group indices ``0..K-1``.

    Returns ``(codes, classes)`` where ``classes`` is sorted. Every group is
    nonempty by construction.
    """
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError("labels must be one-dimensional")
    classes, codes = np.unique(y, return_inverse=True)
    if len(classes) < 2:
        raise ValueError("need at least two groups")
    return codes.astype(np.int64), classes


def check_sizes(sizes, min_total=2):
    sizes = tuple(int(s) for s in sizes)
    if len(sizes) < 2:
        raise ValueError("need at least two groups")
    if any(s < 1 for s in sizes):
        raise ValueError(f"group sizes must be positive, got {sizes}")
    n = sum(sizes)
    if n % 2:
        raise PreconditionError(f"total sample size must be even, got {n}")
    if n < min_total:
        raise PreconditionError(f"total sample size {n} below {min_total}")
    return sizes
