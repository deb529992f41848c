"""Sampling families, parametric competitors and the power harness."""

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import geometry
from ._validation import PreconditionError, check_sizes, encode_labels
from .counts import count_matrix, cross_vector
from .null_dist import _check_enum_limits, null_moments
from .stattests import (_count_extreme, _Mahalanobis, _StatEngine,
                        asymptotic_pvalue_mcm, asymptotic_pvalue_mmcm,
                        exact_pvalue, mcm_statistic)

FAMILIES = ("normal-location", "normal-spherical-scale",
            "normal-equicorrelated", "lognormal-location",
            "lognormal-spherical-scale", "lognormal-equicorrelated")
GRAPH_METHODS = ("mcm", "mmcm", "mfrt")
PARAMETRIC_METHODS = ("anderson", "lrt")


@dataclass(frozen=True)
class FamilyConfig:
    """One simulation setting; group ``s`` (0-based) is shifted by ``s*delta``.

    * location: ``N_d(s delta 1, I)``
    * spherical-scale: ``N_d(0, (1 + s delta) I)``
    * equicorrelated: unit variances, correlation ``s delta / (K - 1)``

    The lognormal families exponentiate the normal draws entrywise.
    """

    family: str
    K: int
    d: int
    delta: float
    sizes: tuple

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.delta < 0:
            raise ValueError("delta must be >= 0")
        if self.d < 1 or self.K < 2:
            raise ValueError("need d >= 1 and K >= 2")
        if len(self.sizes) != self.K or any(s < 1 for s in self.sizes):
            raise ValueError(f"sizes {self.sizes} do not match K={self.K}")
        if self.family.endswith("equicorrelated") and self.delta >= 1:
            raise ValueError("equicorrelated family needs delta < 1 "
                             "(correlations in [0, 1))")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))


def _replicate_rng(seed, r):
    key = (int(r) << 64) | (int(seed) & 0xFFFFFFFFFFFFFFFF)
    return np.random.Generator(np.random.Philox(key=key))


def sample_family(cfg, seed=0):
    """Draw one dataset; returns ``(X, labels)`` with group codes 0..K-1."""
    rng = seed if isinstance(seed, np.random.Generator) \
        else np.random.default_rng(seed)
    base = cfg.family.split("-", 1)[1]
    blocks = []
    for s, m in enumerate(cfg.sizes):
        E = rng.standard_normal((m, cfg.d))
        if base == "location":
            X = E + s * cfg.delta
        elif base == "spherical-scale":
            X = E * np.sqrt(1 + s * cfg.delta)
        else:
            rho = s * cfg.delta / (cfg.K - 1)
            common = rng.standard_normal((m, 1))
            X = np.sqrt(rho) * common + np.sqrt(1 - rho) * E
        blocks.append(X)
    X = np.concatenate(blocks)
    if cfg.family.startswith("lognormal"):
        X = np.exp(X)
    return X, np.repeat(np.arange(cfg.K), cfg.sizes)


def anderson_test(X, labels):
    """Hotelling T^2 test on within-index contrasts (equal group sizes).

    Row ``i`` of each group is paired across groups; the contrast vector
    stacks ``X^(1)_i - X^(s)_i`` for ``s = 2..K``, and its mean is tested
    against zero with the F reference distribution.
    """
    X = np.asarray(X, dtype=float)
    codes, classes = encode_labels(labels)
    K = len(classes)
    sizes = np.bincount(codes)
    if np.any(sizes != sizes[0]):
        raise PreconditionError("anderson_test needs equal group sizes")
    n, d = int(sizes[0]), X.shape[1]
    q = (K - 1) * d
    if d >= len(codes) / (K * (K - 1)):
        raise PreconditionError(
            f"anderson_test not applicable: d={d} >= N/(K(K-1))"
            f"={len(codes) / (K * (K - 1)):.4g}")
    groups = [X[codes == s] for s in range(K)]
    Y = np.hstack([groups[0] - g for g in groups[1:]])
    ybar = Y.mean(axis=0)
    S = np.cov(Y, rowvar=False).reshape(q, q)
    t2 = n * ybar @ np.linalg.solve(S, ybar)
    F = (n - q) / (q * (n - 1)) * t2
    return float(stats.f.sf(F, q, n - q))


def lrt_covariance(X, labels):
    """Likelihood-ratio test of equal covariance matrices across groups.

    ``-2 log lambda = N log|S| - sum N_s log|S_s|`` with maximum-likelihood
    covariances, referred to chi-square on ``d(d+1)(K-1)/2`` df.
    """
    X = np.asarray(X, dtype=float)
    codes, classes = encode_labels(labels)
    K = len(classes)
    d = X.shape[1]
    N = len(codes)
    pooled = np.zeros((d, d))
    total = 0.0
    for s in range(K):
        G = X[codes == s]
        if len(G) <= d:
            raise PreconditionError(
                f"lrt_covariance not applicable: group size {len(G)} <= d={d}")
        C = np.cov(G, rowvar=False, ddof=0).reshape(d, d)
        sign, logdet = np.linalg.slogdet(C)
        if sign <= 0:
            raise PreconditionError("singular group covariance")
        total += len(G) * logdet
        pooled += len(G) * C
    sign, logdet = np.linalg.slogdet(pooled / N)
    if sign <= 0:
        raise PreconditionError("singular pooled covariance")
    stat = max(N * logdet - total, 0.0)
    df = d * (d + 1) * (K - 1) // 2
    return float(stats.chi2.sf(stat, df))


@dataclass
class PowerReport:
    config: FamilyConfig
    power: dict
    rejections: dict
    valid: dict
    replicates: int
    alpha: float
    calibration: str
    seed: int
    wall_time: float
    permutations: int = None
    pvalues: dict = field(default_factory=dict, repr=False)

    def to_dict(self, with_pvalues=False):
        d = asdict(self)
        d["config"]["sizes"] = list(self.config.sizes)
        if not with_pvalues:
            d.pop("pvalues")
        else:
            d["pvalues"] = {k: np.asarray(v).tolist()
                            for k, v in self.pvalues.items()}
        return d


def replicate_pvalues(X, codes, methods, calibration="asymptotic",
                      n_permutations=200, seed=0):
    """p-value of each method on one dataset, sharing the graphs.

    ``mfrt`` is always permutation-calibrated. Parametric tests that are not
    applicable give ``nan``.
    """
    K = int(codes.max()) + 1
    out = {}
    graph_methods = [m for m in methods if m in GRAPH_METHODS]
    if graph_methods:
        D = geometry.pairwise_distances(X)
        sizes = tuple(np.bincount(codes, minlength=K).tolist())
    match = mst = None
    for m in methods:
        if m in PARAMETRIC_METHODS:
            fn = anderson_test if m == "anderson" else lrt_covariance
            try:
                out[m] = fn(X, codes)
            except PreconditionError:
                out[m] = np.nan
            continue
        if m not in GRAPH_METHODS:
            raise ValueError(f"unknown method {m!r}")
        if m == "mfrt":
            if mst is None:
                mst = geometry.minimum_spanning_tree(D)
            cal, graph = "permutation", mst
        else:
            if match is None:
                match = geometry.min_nonbipartite_matching(D)
            cal, graph = calibration, match
        if cal == "permutation":
            eng = _StatEngine(D, m, codes, K, graph=graph)
            obs = float(eng.values(codes)[0])
            hits = _count_extreme(eng, codes, obs, n_permutations, seed, 1)
            out[m] = (1 + hits) / (n_permutations + 1)
            continue
        v = cross_vector(count_matrix(match, codes, K))
        if cal == "exact":
            _check_enum_limits(sizes)
            if m == "mcm":
                out[m] = exact_pvalue(sizes, float(v.sum()), "mcm-raw")
            else:
                S = _Mahalanobis(null_moments(sizes))(v)
                out[m] = exact_pvalue(sizes, S, "mmcm")
        elif m == "mcm":
            out[m] = asymptotic_pvalue_mcm(mcm_statistic(v, sizes))
        else:
            S = _Mahalanobis(null_moments(sizes))(v)
            out[m] = asymptotic_pvalue_mmcm(S, K)
    return out


def estimate_power(cfg, methods=("mcm", "mmcm"), alpha=0.05, replicates=100,
                   calibration="asymptotic", seed=0, n_permutations=200,
                   n_jobs=1, progress=None):
    """Empirical rejection rate of each method over simulated datasets.

    Every method sees the same dataset in a replicate. Replicate ``r`` draws
    its data from a generator keyed by ``(seed, r)``, so results do not
    depend on ``n_jobs``.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    check_sizes(cfg.sizes)
    methods = tuple(methods)
    t0 = time.perf_counter()

    def one(r):
        X, codes = sample_family(cfg, _replicate_rng(seed, r))
        perm_seed = (int(seed) * 0x9E3779B97F4A7C15 + r + 1) % 2**64
        return replicate_pvalues(X, codes, methods, calibration,
                                 n_permutations, perm_seed)

    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            results = list(ex.map(one, range(replicates)))
    else:
        results = []
        for r in range(replicates):
            results.append(one(r))
            if progress is not None:
                progress(r + 1, replicates)
    pv = {m: np.array([res[m] for res in results]) for m in methods}
    valid = {m: int(np.count_nonzero(~np.isnan(pv[m]))) for m in methods}
    rej = {m: int(np.count_nonzero(pv[m] <= alpha)) for m in methods}
    power = {m: (rej[m] / valid[m] if valid[m] else None) for m in methods}
    return PowerReport(cfg, power, rej, valid, replicates, alpha, calibration,
                       seed, time.perf_counter() - t0, n_permutations, pv)


def _best(power):
    vals = {m: v for m, v in power.items() if v is not None}
    if not vals:
        return ""
    top = max(vals.values())
    return "+".join(m for m, v in vals.items() if v == top)


def emit_power_table(reports, fmt="csv", path=None, layout="long"):
    """Render power reports as CSV or JSON.

    ``layout="long"`` writes one row per report with a ``best`` column naming
    the method(s) with the highest power. ``layout="wide"`` writes one row per
    delta and one column per (method, d), plus ``best@d`` columns, which is
    a compact grid for reading across dimensions. Returns the text; writes it to
    ``path`` when given.
    """
    reports = list(reports)
    if fmt == "json":
        text = json.dumps([r.to_dict() for r in reports], indent=2)
    elif fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        methods = sorted({m for r in reports for m in r.power},
                         key=lambda m: (GRAPH_METHODS + PARAMETRIC_METHODS).index(m)
                         if m in GRAPH_METHODS + PARAMETRIC_METHODS else 99)
        fmt_p = (lambda v: "" if v is None else f"{v:.3f}")
        if layout == "long":
            w.writerow(["family", "K", "d", "delta", "sizes", "replicates",
                        "alpha", "calibration"]
                       + [f"power_{m}" for m in methods] + ["best"])
            for r in reports:
                c = r.config
                w.writerow([c.family, c.K, c.d, c.delta,
                            " ".join(map(str, c.sizes)), r.replicates,
                            r.alpha, r.calibration]
                           + [fmt_p(r.power.get(m)) for m in methods]
                           + [_best(r.power)])
        elif layout == "wide":
            ds = sorted({r.config.d for r in reports})
            deltas = sorted({r.config.delta for r in reports})
            cell = {(r.config.delta, r.config.d): r for r in reports}
            w.writerow(["delta"] + [f"{m}@{d}" for d in ds for m in methods]
                       + [f"best@{d}" for d in ds])
            for dl in deltas:
                row = [dl]
                for d in ds:
                    r = cell.get((dl, d))
                    row += [fmt_p(r.power.get(m)) if r else ""
                            for m in methods]
                row += [_best(cell[(dl, d)].power) if (dl, d) in cell else ""
                        for d in ds]
                w.writerow(row)
        else:
            raise ValueError(f"unknown layout {layout!r}")
        text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


GRID_KEYS = {"family", "K", "d", "delta", "sizes", "methods", "alpha",
             "replicates", "calibration", "permutations", "seed"}


def load_grid(path_or_dict):
    """Read a power-grid config (JSON).

    Keys: ``family``, ``K``, ``d`` (int or list), ``delta`` (number or
    list), ``sizes`` (list of K ints), and optionally ``methods``,
    ``alpha``, ``replicates``, ``calibration``, ``permutations``, ``seed``.
    """
    if isinstance(path_or_dict, dict):
        cfg = dict(path_or_dict)
    else:
        with open(path_or_dict) as fh:
            cfg = json.load(fh)
    unknown = set(cfg) - GRID_KEYS
    if unknown:
        raise ValueError(f"unknown grid keys: {sorted(unknown)}")
    for key in ("family", "K", "d", "delta", "sizes"):
        if key not in cfg:
            raise ValueError(f"grid config missing {key!r}")
    cfg["d"] = list(np.atleast_1d(cfg["d"]).astype(int))
    cfg["delta"] = [float(x) for x in np.atleast_1d(cfg["delta"])]
    return cfg


def run_grid(grid, n_jobs=1, progress=None):
    g = load_grid(grid)
    reports = []
    for delta in g["delta"]:
        for d in g["d"]:
            cfg = FamilyConfig(g["family"], int(g["K"]), int(d), delta,
                               tuple(g["sizes"]))
            reports.append(estimate_power(
                cfg, g.get("methods", ("mcm", "mmcm")), g.get("alpha", 0.05),
                g.get("replicates", 100), g.get("calibration", "asymptotic"),
                g.get("seed", 0), g.get("permutations", 200), n_jobs))
            if progress is not None:
                progress(reports[-1])
    return reports


def family_densities(family, K, d, delta):
    """Density objects for the K groups of a sampling family."""
    from .alternative import Gaussian, LogNormal
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    base = family.split("-", 1)[1]
    out = []
    for s in range(K):
        if base == "location":
            g = Gaussian(np.full(d, s * delta), 1.0)
        elif base == "spherical-scale":
            g = Gaussian(np.zeros(d), 1 + s * delta)
        else:
            rho = s * delta / (K - 1)
            g = Gaussian(np.zeros(d), (1 - rho) * np.eye(d) + rho)
        out.append(LogNormal(g) if family.startswith("lognormal") else g)
    return out
