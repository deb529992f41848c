"""Limits of the count matrix under alternatives.

Every integral here is an expectation over the mixture ``phi = sum p_s f_s``
and is written in terms of the posterior weights
``w_s(z) = p_s f_s(z) / phi(z)``, estimated by plain Monte Carlo with
draws from ``phi``.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.special import logsumexp

from . import geometry
from ._validation import NumericalError, PreconditionError, check_sizes
from .counts import count_matrix, pair_index

_CHUNK = 100_000
_RESOLUTION = 16 * np.finfo(float).eps


# -- densities ---------------------------------------------------------------

class Gaussian:
    """Multivariate normal. ``cov`` may be a scalar (times the identity)."""

    def __init__(self, mean, cov=1.0):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float))
        d = len(self.mean)
        cov = np.asarray(cov, dtype=float)
        self.cov = cov * np.eye(d) if cov.ndim == 0 else cov
        self._dist = stats.multivariate_normal(self.mean, self.cov)
        self.dim = d

    def logpdf(self, Z):
        Z = np.asarray(Z, dtype=float).reshape(-1, self.dim)
        return np.atleast_1d(self._dist.logpdf(Z))

    def rvs(self, n, rng):
        return rng.multivariate_normal(self.mean, self.cov, size=n)


class LogNormal:
    """Entrywise exponential of a :class:`Gaussian`."""

    def __init__(self, base):
        self.base = base
        self.dim = base.dim

    def logpdf(self, Z):
        Z = np.asarray(Z, dtype=float).reshape(-1, self.dim)
        out = np.full(len(Z), -np.inf)
        ok = np.all(Z > 0, axis=1)
        L = np.log(Z[ok])
        out[ok] = self.base.logpdf(L) - L.sum(axis=1)
        return out


    def rvs(self, n, rng):
        return np.exp(self.base.rvs(n, rng))


class CustomDensity:
    """Plugin density from a vectorized log-density and a sampler.

    ``logpdf(Z)`` maps an ``(n, d)`` array to ``n`` log-densities and
    ``sampler(n, rng)`` returns ``n`` draws; both must be safe to call
    concurrently.
    """

    def __init__(self, logpdf, sampler, dim):
        self._logpdf = logpdf
        self._sampler = sampler
        self.dim = dim

    def logpdf(self, Z):
        return np.asarray(self._logpdf(np.asarray(Z, dtype=float)), dtype=float)

    def rvs(self, n, rng):
        return np.asarray(self._sampler(n, rng), dtype=float).reshape(n, self.dim)


@dataclass
class AlternativeSpec:
    densities: list
    proportions: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.proportions, dtype=float)
        if len(p) != len(self.densities) or len(p) < 2:
            raise ValueError("need one proportion per density, K >= 2")
        if np.any(p <= 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("proportions must be positive and sum to 1")
        self.proportions = p / p.sum()

    @property
    def K(self):
        return len(self.densities)

    def with_proportions(self, p):
        return AlternativeSpec(self.densities, p)

    def sample_mixture(self, n, rng):
        comp = rng.choice(self.K, size=n, p=self.proportions)
        counts = np.bincount(comp, minlength=self.K)
        Z = np.empty((n, self.densities[0].dim))
        for s in range(self.K):
            if counts[s]:
                Z[comp == s] = self.densities[s].rvs(counts[s], rng)
        return Z, comp

    def weights(self, Z):
        """Posterior weights ``w_s(z)``, shape ``(n, K)``."""
        logs = np.column_stack([np.log(p) + f.logpdf(Z) for p, f
                                in zip(self.proportions, self.densities)])
        if np.any(np.isnan(logs)) or np.any(logs == np.inf):
            raise NumericalError("density evaluation returned nan or inf")
        norm = logsumexp(logs, axis=1, keepdims=True)
        if np.any(~np.isfinite(norm)):
            raise NumericalError("mixture density is zero at a sampled point")
        return np.exp(logs - norm)


def _chunk_rng(seed, i):
    key = (int(i) << 64) | (int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def _mc_weights(spec, n, seed):
    """Posterior weights at ``n`` draws from the mixture, made in fixed-size
    chunks with one substream per chunk."""
    if n < 1:
        raise ValueError("number of Monte Carlo samples must be >= 1")
    out = []
    for i, start in enumerate(range(0, n, _CHUNK)):
        Z, _ = spec.sample_mixture(min(_CHUNK, n - start), _chunk_rng(seed, i))
        out.append(spec.weights(Z))
    return np.concatenate(out)


def _mean(x):
    # reduce along a contiguous axis so numpy uses pairwise summation;
    # a strided axis-0 mean accumulates O(n eps) rounding error
    x = np.asarray(x, dtype=float)
    flat = np.ascontiguousarray(x.reshape(x.shape[0], -1).T)
    return flat.mean(axis=1).reshape(x.shape[1:])


def _mean_se(x):
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    m = _mean(x)
    if n < 2:
        return m, np.full(x.shape[1:], np.inf)
    return m, np.sqrt(_mean((x - m) ** 2) * n / (n - 1) / n)


# -- H matrix and Henze-Penrose ------------------------------------------------

@dataclass
class HMatrix:
    h: np.ndarray
    se: np.ndarray
    aggregate: float
    aggregate_se: float
    n_samples: int

    def to_csv(self, path):
        K = self.h.shape[0]
        rows = [(f"h[{s + 1},{t + 1}]", self.h[s, t], self.se[s, t])
                for s in range(K) for t in range(s, K)]
        rows.append(("aggregate", self.aggregate, self.aggregate_se))
        write_estimates_csv(rows, path)


def h_matrix(spec, mc_samples=100_000, seed=0):
    """Almost-sure limit of ``A_N / N`` under the alternative ``spec``.

    ``h[s, t] = E[w_s w_t]`` for ``s != t`` and ``h[s, s] = E[w_s^2] / 2``.
    """
    W = _mc_weights(spec, mc_samples, seed)
    K = spec.K
    prods = W[:, :, None] * W[:, None, :]
    prods[:, np.arange(K), np.arange(K)] /= 2
    h, se = _mean_se(prods)
    iu = pair_index(K)
    agg_terms = prods[:, iu[0], iu[1]].sum(axis=1)
    agg, agg_se = _mean_se(agg_terms[:, None])
    return HMatrix(h, se, float(agg[0]), float(agg_se[0]), mc_samples)


def hp_aggregate(h):
    """Total limiting cross-count rate ``1/2 - trace(H)``."""
    if isinstance(h, HMatrix):
        return h.aggregate
    h = np.asarray(h)
    return 0.5 - float(np.trace(h))


def henze_penrose(f1, f2, p=(0.5, 0.5), mc_samples=100_000, seed=0,
                  return_se=False):
    """Monte Carlo estimate of ``delta = E_phi[w_1^2 + w_2^2]``."""
    spec = AlternativeSpec([f1, f2], p)
    W = _mc_weights(spec, mc_samples, seed)
    m, se = _mean_se((W ** 2).sum(axis=1)[:, None])
    return (float(m[0]), float(se[0])) if return_se else float(m[0])


# -- Gamma matrices ------------------------------------------------------------

@dataclass
class GammaMatrices:
    Q11: np.ndarray
    Q12: np.ndarray
    Q22: np.ndarray
    Gamma: np.ndarray
    Gamma_se: np.ndarray
    R22: np.ndarray
    M: np.ndarray
    q22_identity_error: float
    n_samples: int
    extra: dict = field(default_factory=dict)

    def to_csv(self, path):
        rows = []
        for name in ("Q11", "Q12", "Q22", "R22", "M"):
            A = getattr(self, name)
            rows += [(f"{name}[{i + 1},{j + 1}]", A[i, j], "")
                     for i in range(A.shape[0]) for j in range(A.shape[1])]
        G, S = self.Gamma, self.Gamma_se
        rows += [(f"Gamma[{i + 1},{j + 1}]", G[i, j], S[i, j])
                 for i in range(G.shape[0]) for j in range(G.shape[1])]
        write_estimates_csv(rows, path)


def _gamma_terms(W, p):
    """Per-sample integrands of Q11 and Q12, shapes (n, m, m) and (n, m, K-1)."""
    K = W.shape[1]
    s_idx, t_idx = pair_index(K)
    m = len(s_idx)
    hbar = 2 * W[:, s_idx] * W[:, t_idx]                     # (n, m)
    q11 = -0.5 * hbar[:, :, None] * hbar[:, None, :]
    d = np.arange(m)
    q11[:, d, d] = 0.5 * hbar * (1 - hbar)
    q12 = np.empty((W.shape[0], m, K - 1))
    for u in range(K - 1):
        member = (s_idx == u) | (t_idx == u)
        q12[:, :, u] = np.where(member,
                                0.5 * hbar * (1 - 2 * W[:, [u]]),
                                -hbar * W[:, [u]])
    return q11, q12


def gamma_matrices(spec, mc_samples=100_000, seed=0):
    """Limiting covariance ``Gamma = Q11 - Q12 Q22^{-1} Q12^T`` under ``spec``.

    Standard errors for ``Gamma`` use the delta method on the per-sample
    integrands (``Q22`` is exact), floored at the floating-point resolution
    of the entries. Also returns ``R22`` and ``M`` and the
    largest entry of ``|Q22 - (R22 + M)|`` as a consistency diagnostic.
    """
    p = spec.proportions
    K = spec.K
    W = _mc_weights(spec, mc_samples, seed)
    q11, q12 = _gamma_terms(W, p)
    Q11, Q12 = _mean(q11), _mean(q12)
    pk = p[:K - 1]
    Q22 = np.diag(pk) - np.outer(pk, pk)
    try:
        P = np.linalg.solve(Q22, Q12.T)                      # Q22^{-1} Q12^T
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Q22 is singular") from exc
    Gamma = Q11 - Q12 @ P
    Gamma = (Gamma + Gamma.T) / 2
    # influence of each draw on Gamma (first order)
    A = q12 @ P                                              # (n, m, m)
    infl = q11 - A - np.transpose(A, (0, 2, 1))
    _, Gamma_se = _mean_se(infl)
    # no SE below the floating-point resolution of the estimate itself
    # (constant integrands, e.g. equal densities, give a zero sample SE)
    scale = max(np.abs(Q11).max(), np.abs(Q12 @ P).max())
    Gamma_se = np.hypot(Gamma_se, _RESOLUTION * scale)
    Wk = W[:, :K - 1]
    R22 = -_mean(Wk[:, :, None] * Wk[:, None, :])
    R22[np.diag_indices(K - 1)] = _mean(Wk * (1 - Wk))
    M = np.atleast_2d(np.cov(Wk, rowvar=False, ddof=0))
    err = float(np.max(np.abs(Q22 - (R22 + M))))
    return GammaMatrices(Q11, Q12, Q22, Gamma, Gamma_se, R22, M, err,
                         mc_samples)


def gamma2_two_sample(f1, f2, p=(0.5, 0.5), mc_samples=100_000, seed=0,
                      return_se=False):
    """Two-sample limiting variance of the centred cross count.

    ``E[w1 w2 (w1^2 + w2^2)] - E[w1 w2 (w2 - w1)]^2 / (p1 p2)``, clipped
    at zero.
    """
    spec = AlternativeSpec([f1, f2], p)
    W = _mc_weights(spec, mc_samples, seed)
    w1, w2 = W[:, 0], W[:, 1]
    a = w1 * w2 * (w1 ** 2 + w2 ** 2)
    b = w1 * w2 * (w2 - w1)
    pp = spec.proportions[0] * spec.proportions[1]
    bm = _mean(b[:, None])[0]
    g2 = _mean(a[:, None])[0] - bm ** 2 / pp
    _, se = _mean_se((a - 2 * bm * b / pp)[:, None])
    se = float(se[0])
    g2 = max(float(g2), 0.0)
    return (g2, float(se)) if return_se else g2


# -- bootstrap alternative, conditional mean, CLT check -----------------------

@dataclass
class BootstrapSample:
    Z: np.ndarray
    labels: np.ndarray
    eta: np.ndarray


def bootstrap_sample(spec, sizes, seed=0):
    """Pooled draws from ``phi_N = sum (N_s/N) f_s`` with posterior labels."""
    sizes = check_sizes(sizes, min_total=0) if sum(sizes) % 2 == 0 \
        else tuple(int(s) for s in sizes)
    n = sum(sizes)
    specN = spec.with_proportions(np.asarray(sizes, dtype=float) / n)
    rng = np.random.default_rng(seed)
    Z, _ = specN.sample_mixture(n, rng)
    W = specN.weights(Z)
    u = rng.random(n)[:, None]
    labels = np.minimum((np.cumsum(W, axis=1) < u).sum(axis=1), spec.K - 1)
    return BootstrapSample(Z, labels, np.bincount(labels, minlength=spec.K))


def conditional_mean_mu(pooled, matching, spec, sizes, full=False):
    """Conditional mean of the cross counts given the pooled sample.

    Sums ``w_s(x) w_t(y) + w_t(x) w_s(y)`` over matched pairs ``(x, y)``
    with weights built from the proportions ``N_s / N``. With ``full=True``
    returns the K x K matrix whose diagonal holds ``sum w_s(x) w_s(y)``.
    """
    sizes = tuple(int(s) for s in sizes)
    Z = np.asarray(pooled, dtype=float)
    pairs = getattr(matching, "pairs", matching)
    specN = spec.with_proportions(np.asarray(sizes, dtype=float) / sum(sizes))
    W = specN.weights(Z)
    Wx, Wy = W[pairs[:, 0]], W[pairs[:, 1]]
    mu = Wx.T @ Wy
    mu = mu + mu.T
    mu[np.diag_indices(spec.K)] /= 2
    if full:
        return mu
    return mu[pair_index(spec.K)]


@dataclass
class CLTReport:
    values: np.ndarray
    gamma2: float
    gamma2_se: float
    mean: float
    sd: float
    ks_statistic: float
    ks_pvalue: float
    replicates: int


def clt_diagnostic(spec, sizes, replicates=200, seed=0, mc_samples=200_000,
                   progress=None):
    """Centred two-sample cross counts against their normal limit.

    Each replicate draws ``N_s`` points from ``f_s``, matches the pooled
    sample and records ``(R - mu_N) / sqrt(N)``. The values are divided by
    ``gamma`` and compared with N(0, 1) by a KS test.
    """
    if spec.K != 2:
        raise PreconditionError("clt_diagnostic covers the two-sample case")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    sizes = check_sizes(sizes)
    n = sum(sizes)
    p = np.asarray(sizes, dtype=float) / n
    g2, g2_se = gamma2_two_sample(*spec.densities, p=p,
                                  mc_samples=mc_samples, seed=seed,
                                  return_se=True)
    labels = np.repeat([0, 1], sizes)
    vals = np.empty(replicates)
    for r in range(replicates):
        rng = _chunk_rng(seed, r + 1)
        Z = np.concatenate([f.rvs(m, rng) for f, m
                            in zip(spec.densities, sizes)])
        match = geometry.min_nonbipartite_matching(
            geometry.pairwise_distances(Z))
        R = count_matrix(match, labels, 2)[0, 1]
        mu = conditional_mean_mu(Z, match, spec, sizes)[0]
        vals[r] = (R - mu) / np.sqrt(n)
        if progress is not None:
            progress(r + 1, replicates)
    if g2 <= 0:
        raise NumericalError("limiting variance is zero; nothing to compare")
    z = vals / np.sqrt(g2)
    ks = stats.kstest(z, "norm")
    return CLTReport(vals, g2, g2_se, float(vals.mean()),
                     float(vals.std(ddof=1)) if replicates > 1 else 0.0,
                     float(ks.statistic), float(ks.pvalue), replicates)


def write_estimates_csv(rows, path):
    own = isinstance(path, str)
    fh = open(path, "w", newline="") if own else path
    try:
        w = csv.writer(fh)
        w.writerow(["quantity", "estimate", "se"])
        for name, est, se in rows:
            w.writerow([name, repr(float(est)),
                        "" if se == "" else repr(float(se))])
    finally:
        if own:
            fh.close()
