"""Command-line interface: ``crossmatch {test,exact-null,power,gamma,clt-check}``.

Exit status: 0 success, 2 usage error, 3 input/parse error, 4 precondition
not met (e.g. sizes beyond exact enumeration), 5 numerical failure,
1 anything unexpected. Errors are one line on stderr starting with
``error[<kind>]:``.
"""

import argparse
import csv
import io
import json
import os
import sys

import numpy as np

from . import __version__
from ._validation import NumericalError, PreconditionError
from .alternative import AlternativeSpec, clt_diagnostic, gamma_matrices, h_matrix
from .null_dist import exact_pmf
from .simulate import (FAMILIES, FamilyConfig, emit_power_table,
                       estimate_power, family_densities, run_grid)
from .stattests import CALIBRATIONS, METHODS, run_test

THREADS_ENV = "CROSSMATCH_THREADS"

EXIT_OK, EXIT_INTERNAL, EXIT_USAGE = 0, 1, 2
EXIT_PARSE, EXIT_PRECONDITION, EXIT_NUMERIC = 3, 4, 5


class ParseError(ValueError):
    pass


# -- ingestion -----------------------------------------------------------------

def _read_numeric_csv(path, what):
    """Rectangular numeric CSV; a non-numeric first row is taken as a header."""
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open {what} file {path!r}: {exc.strerror}")
    rows, header = [], None
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and header is None and not rows:
                    header = [c.strip() for c in row]
                    continue
                bad = next(c for c in row if not _is_float(c))
                raise ParseError(f"{path}:{lineno}: non-numeric cell {bad!r}")
            if rows and len(vals) != len(rows[0][1]):
                raise ParseError(f"{path}:{lineno}: expected {len(rows[0][1])} "
                                 f"columns, found {len(vals)}")
            rows.append((lineno, vals))
    if not rows:
        raise ParseError(f"{path}: no data rows")
    A = np.array([v for _, v in rows])
    if not np.all(np.isfinite(A)):
        i = int(np.argwhere(~np.isfinite(A))[0, 0])
        raise ParseError(f"{path}:{rows[i][0]}: non-finite value")
    return A, header


def _is_float(c):
    try:
        float(c)
        return True
    except ValueError:
        return False


def _read_labels(path):
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ParseError(f"cannot open labels file {path!r}: {exc.strerror}")
    out = []
    with fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 1:
                raise ParseError(f"{path}:{lineno}: labels file must have one "
                                 f"column, found {len(row)}")
            out.append(row[0].strip())
    if not out:
        raise ParseError(f"{path}: no labels")
    return _normalize_labels(out)


def _normalize_labels(vals):
    vals = [str(v).strip() for v in vals]
    try:
        nums = [float(v) for v in vals]
        if all(x == int(x) for x in nums):
            return np.array([int(x) for x in nums])
    except ValueError:
        pass
    return np.array(vals)


def ingest(data=None, distances=None, labels=None, label_column=None):
    """Load points or a distance matrix plus labels.

    Returns ``(array, labels, is_distance)``. Labels come from a separate
    single-column file or from a column (index or header name) of the data.
    """
    if (data is None) == (distances is None):
        raise ParseError("give exactly one of --data or --distances")
    path = data if data is not None else distances
    A, header = _read_numeric_csv(path, "data" if data else "distance")
    if label_column is not None:
        if labels is not None:
            raise ParseError("give either --labels or --label-column, not both")
        if header is not None and label_column in header:
            j = header.index(label_column)
        else:
            try:
                j = int(label_column)
            except ValueError:
                raise ParseError(f"label column {label_column!r} not found")
        if not -A.shape[1] <= j < A.shape[1]:
            raise ParseError(f"label column {j} out of range for "
                             f"{A.shape[1]} columns")
        y = _normalize_labels(A[:, j].tolist())
        A = np.delete(A, j, axis=1)
    elif labels is not None:
        y = _read_labels(labels)
    else:
        raise ParseError("labels required: use --labels or --label-column")
    if len(y) != A.shape[0]:
        raise ParseError(f"labels file has {len(y)} rows but {path} has "
                         f"{A.shape[0]} rows")
    if distances is not None:
        if A.shape[0] != A.shape[1]:
            raise ParseError(f"{path}: distance matrix must be square, got "
                             f"{A.shape[0]}x{A.shape[1]}")
        if np.any(A < 0):
            raise ParseError(f"{path}: negative distance")
        scale = max(1.0, float(A.max()))
        gap = float(np.max(np.abs(A - A.T)))
        if gap > 1e-9 * scale:
            i, j = np.unravel_index(np.argmax(np.abs(A - A.T)), A.shape)
            raise ParseError(f"{path}: not symmetric (entries [{i},{j}] and "
                             f"[{j},{i}] differ by {gap:.3g})")
        A = (A + A.T) / 2
        np.fill_diagonal(A, 0.0)
    elif A.shape[1] < 1:
        raise ParseError(f"{path}: no feature columns")
    return A, y, distances is not None


# -- output --------------------------------------------------------------------

def _emit(text, out):
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def _kv_csv(d):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["key", "value"])
    for k, v in d.items():
        if isinstance(v, (dict, list)):
            v = json.dumps(v, sort_keys=True)
        w.writerow([k, "" if v is None else v])
    return buf.getvalue()


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ParseError(f"{THREADS_ENV}={env!r} is not an integer")
    return 1


def _int_list(text):
    try:
        vals = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, "
                                         f"got {text!r}")
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _float_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, "
                                         f"got {text!r}")


def _log(msg):
    print(msg, file=sys.stderr)


# -- commands ------------------------------------------------------------------

def cmd_test(args):
    X, y, is_dist = ingest(args.data, args.distances, args.labels,
                           args.label_column)
    res = run_test(X, y, method=args.method, calibration=args.calibration,
                   metric=args.metric, standardize=args.standardize,
                   precomputed=is_dist, n_permutations=args.perms,
                   seed=args.seed, alpha=args.alpha,
                   correction=args.correction, n_jobs=_threads(args))
    if res.dropped_index is not None:
        g = y[res.dropped_index]
        _log(f"note: odd sample size; dropped row {res.dropped_index} "
             f"(0-based) from group {g}")
    d = res.to_dict()
    d["reject"] = bool(res.p_value <= args.alpha)
    d["alpha"] = args.alpha
    if args.format == "json":
        _emit(json.dumps(d, indent=2, sort_keys=True, default=str) + "\n",
              args.out)
    else:
        _emit(_kv_csv(d), args.out)


def cmd_exact_null(args):
    pmf = exact_pmf(tuple(args.sizes))
    if args.format == "csv":
        buf = io.StringIO()
        pmf.to_csv(buf)
        _emit(buf.getvalue(), args.out)
    else:
        entries = [{"matrix": m.tolist(), "probability": float(p),
                    "probability_exact": f"{p.numerator}/{p.denominator}"}
                   for m, p in zip(pmf.matrices, pmf.probabilities)]
        _emit(json.dumps({"sizes": list(pmf.sizes), "pmf": entries},
                         indent=2) + "\n", args.out)


def cmd_power(args):
    threads = _threads(args)
    if args.grid:
        reports = run_grid(args.grid, n_jobs=threads)
    else:
        missing = [f for f in ("family", "K", "d", "delta")
                   if getattr(args, f) is None]
        if missing:
            raise ParseError("power needs --grid or --" + ", --".join(missing))
        sizes = args.sizes or [50 * (s + 1) for s in range(args.K)]
        reports = []
        for d in args.d:
            for delta in args.delta:
                cfg = FamilyConfig(args.family, args.K, d, delta, tuple(sizes))
                reports.append(estimate_power(
                    cfg, args.methods.split(","), args.alpha, args.reps,
                    args.calibration, args.seed, args.perms, threads))
    for r in reports:
        _log(f"note: {r.config.family} d={r.config.d} delta={r.config.delta}"
             f" done in {r.wall_time:.1f}s")
    if args.format == "json":
        payload = []
        for r in reports:
            d = r.to_dict()
            d.pop("wall_time")
            payload.append(d)
        _emit(json.dumps(payload, indent=2) + "\n", args.out)
    else:
        _emit(emit_power_table(reports, "csv", layout=args.layout), args.out)


def _spec_from_args(args, proportions):
    dens = family_densities(args.family, args.K, args.d, args.delta)
    return AlternativeSpec(dens, proportions)


def cmd_gamma(args):
    p = np.asarray(args.proportions if args.proportions
                   else [1.0 / args.K] * args.K, dtype=float)
    if len(p) != args.K:
        raise ParseError(f"--proportions has {len(p)} entries for K={args.K}")
    spec = _spec_from_args(args, p / p.sum())
    g = gamma_matrices(spec, args.mc_samples, args.seed)
    h = h_matrix(spec, args.mc_samples, args.seed)
    if args.format == "csv":
        buf = io.StringIO()
        g.to_csv(buf)
        text = buf.getvalue()
        buf = io.StringIO()
        h.to_csv(buf)
        text += "".join(buf.getvalue().splitlines(True)[1:])
        _emit(text, args.out)
    else:
        d = {k: np.asarray(getattr(g, k)).tolist()
             for k in ("Q11", "Q12", "Q22", "Gamma", "Gamma_se", "R22", "M")}
        d.update(q22_identity_error=g.q22_identity_error,
                 h=h.h.tolist(), h_se=h.se.tolist(), aggregate=h.aggregate,
                 aggregate_se=h.aggregate_se, mc_samples=args.mc_samples,
                 seed=args.seed, proportions=p.tolist())
        _emit(json.dumps(d, indent=2) + "\n", args.out)


def cmd_clt_check(args):
    if args.K != 2:
        raise PreconditionError("clt-check supports K=2 only")
    sizes = args.sizes or [600, 400]
    spec = _spec_from_args(args, np.asarray(sizes, dtype=float) / sum(sizes))
    rep = clt_diagnostic(spec, sizes, args.reps, args.seed, args.mc_samples)
    d = {"gamma2": rep.gamma2, "gamma2_se": rep.gamma2_se, "mean": rep.mean,
         "sd": rep.sd, "ks_statistic": rep.ks_statistic,
         "ks_pvalue": rep.ks_pvalue, "replicates": rep.replicates,
         "sizes": list(sizes), "seed": args.seed}
    if args.format == "json":
        d["values"] = rep.values.tolist()
        _emit(json.dumps(d, indent=2) + "\n", args.out)
    else:
        _emit(_kv_csv(d), args.out)


# -- parser --------------------------------------------------------------------

def build_parser():
    ap = argparse.ArgumentParser(
        prog="crossmatch",
        description="Distribution-free K-sample tests based on minimum "
                    "non-bipartite matching.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="default 0")
    common.add_argument("--out", default=None,
                        help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--threads", type=int, default=None,
                        help=f"worker threads (default ${THREADS_ENV} or 1)")

    t = sub.add_parser("test", parents=[common], help="run a K-sample test")
    t.add_argument("--data", help="CSV of points, one row per observation")
    t.add_argument("--distances", help="CSV of a symmetric distance matrix")
    t.add_argument("--labels", help="single-column CSV of group labels")
    t.add_argument("--label-column",
                   help="take labels from this column of --data/--distances "
                        "(header name or 0-based index)")
    t.add_argument("--method", choices=METHODS, default="mmcm")
    t.add_argument("--calibration", choices=CALIBRATIONS,
                   default="asymptotic")
    t.add_argument("--perms", type=int, default=1000,
                   help="permutations (default 1000)")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--metric", choices=("euclidean", "manhattan"),
                   default="euclidean")
    t.add_argument("--standardize", action="store_true",
                   help="scale each feature to unit variance first")
    t.add_argument("--correction", choices=("bh", "bonferroni"), default="bh",
                   help="multiplicity correction for the pairwise table")
    t.set_defaults(func=cmd_test)

    e = sub.add_parser("exact-null", parents=[common],
                       help="exact null pmf of the count matrix")
    e.add_argument("--sizes", type=_int_list, required=True,
                   help="group sizes, e.g. 2,2")
    e.set_defaults(func=cmd_exact_null)

    fam = argparse.ArgumentParser(add_help=False)
    fam.add_argument("--family", choices=FAMILIES)
    fam.add_argument("--K", type=int)

    p = sub.add_parser("power", parents=[common, fam],
                       help="Monte Carlo power study")
    p.add_argument("--grid", help="JSON grid config (overrides family flags)")
    p.add_argument("--d", type=_int_list, help="dimension(s), e.g. 5,100")
    p.add_argument("--delta", type=_float_list, help="separation(s)")
    p.add_argument("--sizes", type=_int_list,
                   help="group sizes (default 50,100,...,50K)")
    p.add_argument("--methods", default="mcm,mmcm",
                   help="comma list from mcm,mmcm,mfrt,anderson,lrt")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--calibration", choices=CALIBRATIONS,
                   default="asymptotic")
    p.add_argument("--perms", type=int, default=200)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--layout", choices=("long", "wide"), default="long")
    p.set_defaults(func=cmd_power)

    g = sub.add_parser("gamma", parents=[common, fam],
                       help="H matrix and limiting covariance under a family")
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--delta", type=float, required=True)
    g.add_argument("--proportions", type=_float_list)
    g.add_argument("--mc-samples", type=int, default=200_000)
    g.set_defaults(func=cmd_gamma)

    c = sub.add_parser("clt-check", parents=[common, fam],
                       help="two-sample normal limit under an alternative")
    c.add_argument("--d", type=int, required=True)
    c.add_argument("--delta", type=float, required=True)
    c.add_argument("--sizes", type=_int_list)
    c.add_argument("--reps", type=int, default=200)
    c.add_argument("--mc-samples", type=int, default=200_000)
    c.set_defaults(func=cmd_clt_check)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command in ("gamma", "clt-check"):
        if args.family is None:
            ap.error(f"{args.command} requires --family")
        if args.K is None:
            args.K = 2
    try:
        args.func(args)
    except ParseError as exc:
        _log(f"error[parse]: {exc}")
        return EXIT_PARSE
    except PreconditionError as exc:
        _log(f"error[precondition]: {exc}")
        return EXIT_PRECONDITION
    except (NumericalError, np.linalg.LinAlgError, FloatingPointError) as exc:
        _log(f"error[numeric]: {exc}")
        return EXIT_NUMERIC
    except ValueError as exc:
        _log(f"error[input]: {exc}")
        return EXIT_PARSE
    except Exception as exc:  # noqa: BLE001
        _log(f"error[internal]: {type(exc).__name__}: {exc}")
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
