"""Command-line front end.

Subcommands:

``path``     LASSO path on CSV data with a LOO (or k-fold) error per penalty.
``synth``    Finite-size experiments on the Gaussian ensemble, aggregated over samples.
``replica``  Large-system curves and the marked ROC points.

Exit codes: 0 ok, 2 bad input or unreadable file, 3 non-convergence (partial
results are still written), 4 resource guard, 5 ragged CSV, 6 non-numeric
CSV cell.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _io
from .datagen import EnsembleSpec, sample_instance
from .fast_loo import SingularPrefactorError, looe_approx1, looe_approx2
from .lasso import auto_grid, debias, debias_path, lambda_max, rss, solve_path
from .metrics import argmin_lambda, mse, one_standard_error, tp_fp
from .model import Estimator, ProblemInstance, RunConfig, validate_instance
from .naive_cv import kfold_cv, naive_loo
from .replica import EosNonConvergence, ReplicaDomainError, ReplicaParams, solve_point, sweep_lambda

log = logging.getLogger("loocv")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NONCONVERGED = 3
EXIT_RESOURCE = 4

WORKERS_ENV = "LOOCV_WORKERS"
DEFAULT_MAX_WORK = 2e9
VERSION = "0.1.0"


class UsageError(Exception):
    code = EXIT_INPUT


class ResourceGuard(Exception):
    code = EXIT_RESOURCE


# argument helpers ---------------------------------------------------------------


def parse_lambdas(spec: str, inst: ProblemInstance | None = None) -> np.ndarray:
    """Penalty grid from ``auto[:K]``, ``log:HI:LO:N`` or a comma-separated list.

    The result is sorted descending. ``auto`` needs an instance: it spans
    four decades below ``||A^T y||_inf``.
    """
    s = spec.strip()
    try:
        if s == "auto" or s.startswith("auto:"):
            if inst is None:
                raise UsageError("--lambdas auto needs data; give an explicit grid")
            n = int(s.split(":", 1)[1]) if ":" in s else 50
            if n < 1:
                raise UsageError("auto grid needs at least one point")
            return auto_grid(inst, n)
        if s.startswith("log:"):
            _, hi, lo, n = s.split(":")
            hi, lo, n = float(hi), float(lo), int(n)
            if not (hi > 0 and lo > 0 and n >= 1):
                raise UsageError(f"bad log grid {spec!r}")
            return np.geomspace(max(hi, lo), min(hi, lo), n) if n > 1 else np.array([hi])
        vals = np.array([float(t) for t in s.split(",") if t.strip()])
    except ValueError:
        raise UsageError(f"cannot parse --lambdas {spec!r}") from None
    if vals.size == 0 or np.any(~np.isfinite(vals)) or np.any(vals <= 0):
        raise UsageError(f"--lambdas must be positive numbers, got {spec!r}")
    vals = np.unique(vals)[::-1]
    return vals


def parse_method(s: str):
    """``approx1``, ``approx2``, ``naive`` or ``kfold:K`` -> ``(name, k)``."""
    if s in ("approx1", "approx2", "naive"):
        return s, None
    if s.startswith("kfold:"):
        try:
            k = int(s.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad k in {s!r}") from None
        return "kfold", k
    raise UsageError(f"unknown method {s!r}")


def resolve_workers(flag) -> int:
    if flag is not None:
        w = flag
    else:
        env = os.environ.get(WORKERS_ENV, "1")
        try:
            w = int(env)
        except ValueError:
            raise UsageError(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
    if w < 1:
        raise UsageError("worker count must be positive")
    return w


def standardize(A: np.ndarray) -> np.ndarray:
    """Center each column and scale it to unit Euclidean norm (constant columns are left at zero)."""
    A = A - A.mean(axis=0)
    norms = np.linalg.norm(A, axis=0)
    return A / np.where(norms > 0, norms, 1.0)


def _provenance(cmd: str, args, skip=("out", "workers", "func", "verbose")) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in skip}
    return {"program": "loocv", "version": VERSION, "command": cmd, "flags": flags, "argv": _argv(cmd, flags)}


def _argv(cmd, flags) -> list:
    out = [cmd]
    for k, v in flags.items():
        if k == "command" or v is None or v is False:
            continue
        opt = "--" + k.replace("_", "-")
        if v is True:
            out.append(opt)
        else:
            out += [opt, str(v)]
    return out


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    try:
        return open(path, "w", newline=""), True
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# path ---------------------------------------------------------------------------


def load_instance(a_path, y_path, header=False, do_standardize=False) -> ProblemInstance:
    A = _io.read_matrix(a_path, header)
    y = _io.read_vector(y_path, header)
    if do_standardize:
        A = standardize(A)
    inst = ProblemInstance(A, y)
    diags = validate_instance(inst)
    for d in diags:
        if d.severity != "error":
            _say(f"warning: {d.message}")
    errs = [d for d in diags if d.severity == "error"]
    if errs:
        raise UsageError("; ".join(d.message for d in errs))
    return inst


def path_records(inst, grid, method, k, estimator, cfg, workers=1):
    """One record per penalty, plus the overall convergence flag."""
    cfg = cfg.with_grid(grid)
    sols = debias_path(inst, solve_path(inst, cfg))
    if method == "kfold":
        ests = kfold_cv(inst, cfg.lambda_grid, k, estimator, cfg.seed, cfg, workers)
    else:
        ests = []
        for s in sols:
            if method == "approx1":
                ests.append(looe_approx1(inst, s, estimator))
            elif method == "approx2":
                try:
                    ests.append(looe_approx2(inst, s, estimator))
                except SingularPrefactorError:
                    ests.append(None)
            else:
                ests.append(naive_loo(inst, s.lam, estimator, cfg, full=s, workers=workers))
    records = []
    all_ok = True
    for s, e in zip(sols, ests):
        all_ok &= s.converged
        rec = {
            "lambda": s.lam,
            "df": s.df,
            "rho": s.rho,
            "rss1": rss(inst, s.x1)[1],
            "rss2": rss(inst, s.x2)[1],
            "looe": None if e is None else e.looe,
            "looe_se": None if e is None else e.std_error,
            "method": method if k is None else f"kfold:{k}",
            "estimator": int(estimator),
            "unstable": True if e is None else bool(e.unstable),
            "converged": s.converged,
        }
        records.append(rec)
    return records, all_ok


def _selection_summary(records):
    pts = [(r["lambda"], r["looe"], r["looe_se"], r["df"]) for r in records
           if r["looe"] is not None and np.isfinite(r["looe"]) and np.isfinite(r["looe_se"])]
    if not pts:
        return None
    df_at = {p[0]: p[3] for p in pts}
    lmin = argmin_lambda(pts)
    l1se = one_standard_error([p[:3] for p in pts])
    return {"argmin_lambda": lmin, "argmin_df": df_at[lmin], "one_se_lambda": l1se, "one_se_df": df_at[l1se]}


def cmd_path(args) -> int:
    method, k = parse_method(args.method)
    estimator = Estimator(args.estimator)
    inst = load_instance(args.A, args.y, args.header, args.standardize)
    grid = parse_lambdas(args.lambdas, inst)
    if method == "kfold" and not 2 <= k <= inst.M:
        raise UsageError(f"kfold needs 2 <= k <= M = {inst.M}")
    if estimator is Estimator.TYPE2 and method in ("approx1", "approx2"):
        _say("warning: single-fit approximations are not valid for the debiased estimator; "
             "use --method naive for the correct value")
    if estimator is Estimator.TYPE2 and method == "naive":
        _say(f"note: debiased LOO error by brute force costs {inst.M} refits per penalty")
    cfg = RunConfig(seed=args.seed)
    records, ok = path_records(inst, grid, method, k, estimator, cfg, resolve_workers(args.workers))
    fh, close = _open_out(args.out)
    try:
        w = _io.RecordWriter(fh, args.format, _provenance("path", args))
        for r in records:
            w.write(r)
    finally:
        if close:
            fh.close()
    summ = _selection_summary(records)
    if summ is not None:
        _say(f"argmin lambda = {_io.fmt(summ['argmin_lambda'])} (df = {summ['argmin_df']})")
        _say(f"one-standard-error lambda = {_io.fmt(summ['one_se_lambda'])} (df = {summ['one_se_df']})")
    if not ok:
        _say("error: some LASSO solves did not converge; results written")
        return EXIT_NONCONVERGED
    return EXIT_OK


# synth --------------------------------------------------------------------------


SYNTH_METHODS = ("approx1", "approx2", "naive")


def _parse_ints(s, name):
    try:
        vals = [int(t) for t in str(s).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"--{name} must be integers") from None
    if not vals or min(vals) < 1:
        raise UsageError(f"--{name} must be positive")
    return vals


def _synth_sample(spec: EnsembleSpec, index: int, grid, methods, cfg):
    """Per-penalty quantities for one sample, shape ``(len(grid), n_quantities)``."""
    inst, truth = sample_instance(spec, index)
    sols = debias_path(inst, solve_path(inst, cfg.with_grid(grid)))
    rows = []
    ok = True
    for s in sols:
        ok &= s.converged
        tp, fp = tp_fp(s, truth)
        row = {
            "rho": s.rho,
            "eps1": rss(inst, s.x1)[1],
            "eps2": rss(inst, s.x2)[1],
            "mse1": mse(s.x1, truth),
            "mse2": mse(s.x2, truth),
            "tp": np.nan if tp is None else tp,
            "fp": np.nan if fp is None else fp,
        }
        if "approx1" in methods:
            row["looe_approx1"] = looe_approx1(inst, s).looe
        if "approx2" in methods:
            try:
                row["looe_approx2"] = looe_approx2(inst, s).looe
            except SingularPrefactorError:
                row["looe_approx2"] = np.nan
        if "naive" in methods:
            row["looe_naive1"] = naive_loo(inst, s.lam, Estimator.TYPE1, cfg, full=s).looe
            row["looe_naive2"] = naive_loo(inst, s.lam, Estimator.TYPE2, cfg, full=s).looe
        rows.append(row)
    return rows, ok


def _aggregate(values: np.ndarray):
    """Mean and ``std / sqrt(Ns - 1)`` over finite samples (error is ``None`` for one sample)."""
    v = values[np.isfinite(values)]
    if v.size == 0:
        return None, None
    mean = float(v.mean())
    if v.size < 2:
        return mean, None
    return mean, float(v.std() / np.sqrt(v.size - 1))


def _replica_curve(args, grid):
    try:
        p = ReplicaParams(args.alpha, args.rho_hat, args.sigma_x2, args.sigma_xi2)
    except ReplicaDomainError:
        return None
    sw = sweep_lambda(p, grid, refine=False)
    return [pt if pt.converged else None for pt in sw.points]


def cmd_synth(args) -> int:
    Ns = _parse_ints(args.N, "N")
    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    bad = [m for m in methods if m not in SYNTH_METHODS]
    if bad:
        raise UsageError(f"unknown method(s) {bad}; choose from {SYNTH_METHODS}")
    if args.samples < 1:
        raise UsageError("--samples must be positive")
    specs = []
    try:
        for N in Ns:
            specs.append(EnsembleSpec(N, args.alpha, args.rho_hat, args.sigma_x2, args.sigma_xi2, args.seed))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    work = sum(s.N * s.M for s in specs) * args.samples
    if work > args.max_work:
        raise ResourceGuard(f"N*M*samples = {work:.3g} exceeds --max-work {args.max_work:.3g}")
    grid = parse_lambdas(args.lambdas)
    cfg = RunConfig(lambda_grid=tuple(grid), seed=args.seed)
    grid = np.array(cfg.lambda_grid)
    workers = resolve_workers(args.workers)
    curve = _replica_curve(args, grid)

    fh, close = _open_out(args.out)
    all_ok = True
    try:
        w = _io.RecordWriter(fh, args.format, _provenance("synth", args))
        for spec in specs:
            job = lambda i, spec=spec: _synth_sample(spec, i, grid, methods, cfg)
            if workers > 1:
                with ThreadPoolExecutor(max_workers=workers) as ex:
                    results = list(ex.map(job, range(args.samples)))
            else:
                results = [job(i) for i in range(args.samples)]
            all_ok &= all(ok for _, ok in results)
            keys = list(results[0][0][0])
            for j, lam in enumerate(grid):
                rec = {"N": spec.N, "M": spec.M, "lambda": float(lam), "samples": args.samples}
                for key in keys:
                    mean, err = _aggregate(np.array([r[j][key] for r, _ in results]))
                    rec[key] = mean
                    rec[key + "_err"] = err
                pt = curve[j] if curve is not None else None
                for key in ("rho", "eps1", "eps2", "looe1", "looe2_correct", "looe2_incorrect", "mse1", "mse2", "tp", "fp"):
                    rec["replica_" + key] = None if pt is None else getattr(pt, key)
                w.write(rec)
    finally:
        if close:
            fh.close()
    if not all_ok:
        _say("error: some LASSO solves did not converge; results written")
        return EXIT_NONCONVERGED
    return EXIT_OK


# replica ------------------------------------------------------------------------


def _point_record(pt, mark=None, mark_column=False) -> dict:
    # CSV rows share one header, so there every row carries the column
    rec = {"mark": mark} if mark or mark_column else {}
    rec.update({("lambda" if k == "lam" else k): v for k, v in pt.as_record().items()})
    return rec


def cmd_replica(args) -> int:
    if args.alpha >= 1:
        raise UsageError("replica predictions need alpha < 1")
    try:
        p = ReplicaParams(args.alpha, args.rho_hat, args.sigma_x2, args.sigma_xi2)
    except ReplicaDomainError as exc:
        raise UsageError(str(exc)) from exc
    grid = parse_lambdas(args.lambdas)
    sw = sweep_lambda(p, grid, RunConfig(damping=args.damping), refine=not args.no_refine)
    fh, close = _open_out(args.out)
    try:
        w = _io.RecordWriter(fh, args.format, _provenance("replica", args))
        csv_rows = args.format == "csv"
        for pt in sw.points:
            w.write(_point_record(pt, mark_column=csv_rows))
        for name, pt in sw.marked().items():
            if pt is not None:
                w.write(_point_record(pt, name, csv_rows))
    finally:
        if close:
            fh.close()
    if args.rho_hat == 0:
        _say("note: rho_hat = 0, true-positive ratio undefined")
    for name, pt in sw.marked().items():
        if pt is not None:
            fp = "undefined" if pt.fp is None else f"{pt.fp:.4f}"
            tp = "undefined" if pt.tp is None else f"{pt.tp:.4f}"
            _say(f"{name}: lambda = {_io.fmt(pt.lam)}  (FP, TP) = ({fp}, {tp})")
    if not all(pt.converged for pt in sw.points):
        _say("error: equations of state did not converge at some penalties; results written")
        return EXIT_NONCONVERGED
    return EXIT_OK


# entry point ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="loocv", description=__doc__.split("\n\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", choices=("jsonl", "csv"), default="jsonl")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("path", help="LOO error along a LASSO path on CSV data")
    p.add_argument("--A", required=True, help="design matrix CSV, M rows x N columns")
    p.add_argument("--y", required=True, help="response CSV, M rows x 1 column")
    p.add_argument("--lambdas", default="auto:50", help="auto[:K] | log:HI:LO:N | comma list")
    p.add_argument("--method", default="approx1", help="approx1 | approx2 | naive | kfold:K")
    p.add_argument("--estimator", type=int, choices=(1, 2), default=1)
    p.add_argument("--header", action="store_true", help="skip one header line in each CSV")
    p.add_argument("--standardize", action="store_true", help="center and unit-normalize columns of A")
    p.add_argument("--workers", type=int, help=f"parallel folds (default ${WORKERS_ENV} or 1)")
    common(p)
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("synth", help="finite-size experiments on the Gaussian ensemble")
    p.add_argument("--N", default="256", help="system size(s), comma separated")
    p.add_argument("--alpha", type=float, default=0.8)
    p.add_argument("--rho-hat", type=float, default=0.2)
    p.add_argument("--sigma-x2", type=float, default=1.0)
    p.add_argument("--sigma-xi2", type=float, default=0.001)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--lambdas", default="log:1:0.01:20")
    p.add_argument("--methods", default="approx1,approx2", help="subset of approx1,approx2,naive")
    p.add_argument("--max-work", type=float, default=DEFAULT_MAX_WORK, help="limit on sum(N*M)*samples")
    p.add_argument("--workers", type=int, help=f"parallel samples (default ${WORKERS_ENV} or 1)")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("replica", help="large-system curves and marked ROC points")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--rho-hat", type=float, required=True)
    p.add_argument("--sigma-x2", type=float, default=1.0)
    p.add_argument("--sigma-xi2", type=float, default=0.001)
    p.add_argument("--lambdas", default="log:5:0.001:60")
    p.add_argument("--damping", type=float, default=0.5)
    p.add_argument("--no-refine", action="store_true", help="report marked points on the grid only")
    common(p)
    p.set_defaults(func=cmd_replica)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ResourceGuard, _io.InputError) as exc:
        _say(f"error: {exc}")
        return exc.code
    except EosNonConvergence as exc:
        _say(f"error: {exc}")
        return EXIT_NONCONVERGED


if __name__ == "__main__":
    sys.exit(main())
