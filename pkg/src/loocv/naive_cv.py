"""Brute-force cross validation: literal leave-one-out and k-fold.

Every fold refits the LASSO on its training rows, warm-started from the
full-data solution, and for the debiased estimator refits least squares on
the fold's own active set. This is the reference the single-fit formulas are
checked against, and the only valid estimate of the debiased LOO error.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .fast_loo import LooEstimate
from .lasso import _Workspace, debias, solve_lasso
from .model import Estimator, Method, ProblemInstance, RunConfig

log = logging.getLogger(__name__)

N_RESAMPLES = 200


def _fold_fit(train: ProblemInstance, lam, warm, estimator, cfg):
    sol, report = _Workspace(train).solve(lam, warm, cfg)
    if estimator is Estimator.TYPE2:
        sol = debias(train, sol)
    return sol.estimate(estimator), report.converged


def _heldout_terms(inst, rows, lam, warm, estimator, cfg):
    """Squared-error halves on ``rows`` after fitting on the complement."""
    train = inst.drop_rows(rows)
    x, ok = _fold_fit(train, lam, warm, estimator, cfg)
    r = inst.y[rows] - inst.A[rows] @ x
    return 0.5 * r**2, ok


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def naive_loo(
    inst: ProblemInstance,
    lam: float,
    estimator=Estimator.TYPE1,
    cfg: RunConfig | None = None,
    full=None,
    workers: int = 1,
) -> LooEstimate:
    """Leave-one-out error by ``M`` refits.

    ``full`` is an optional full-data :class:`LassoSolution` at ``lam`` used as
    the warm start of every fold; it is computed when omitted. Folds whose
    solve does not converge are excluded from the mean and flag the estimate
    unstable.
    """
    if inst.M < 2:
        raise ValueError("leave-one-out needs at least two observations")
    cfg = cfg or RunConfig()
    estimator = Estimator(estimator)
    if full is None:
        full, _ = solve_lasso(inst, lam, cfg=cfg)
    warm = full.x1

    def one(mu):
        t, ok = _heldout_terms(inst, [mu], lam, warm, estimator, cfg)
        return t[0] if ok else np.nan

    terms = np.array(_map(one, range(inst.M), workers))
    est = LooEstimate.from_terms(lam, terms, Method.NAIVE, estimator)
    if est.n_excluded:
        log.warning("%d of %d folds did not converge at lambda=%g", est.n_excluded, inst.M, lam)
    return est


def naive_loo_path(inst: ProblemInstance, sols, estimator=Estimator.TYPE1, cfg=None, workers: int = 1) -> list:
    """:func:`naive_loo` at every full-data solution in ``sols``."""
    return [naive_loo(inst, s.lam, estimator, cfg, full=s, workers=workers) for s in sols]


def fold_partition(M: int, k: int, seed) -> list:
    """Random partition of ``range(M)`` into ``k`` folds of near-equal size.

    Fold sizes differ by at most one. Each fold is sorted.
    """
    if not 2 <= k <= M:
        raise ValueError(f"need 2 <= k <= M, got k={k}, M={M}")
    perm = np.random.default_rng(seed).permutation(M)
    return [np.sort(f) for f in np.array_split(perm, k)]


def _resampled_se(terms: np.ndarray, rng) -> float:
    """Monte-Carlo (bootstrap) standard error of the mean of ``terms``."""
    kept = terms[np.isfinite(terms)]
    if kept.size < 2:
        return 0.0
    idx = rng.integers(0, kept.size, size=(N_RESAMPLES, kept.size))
    return float(kept[idx].mean(axis=1).std(ddof=1))


def kfold_cv(
    inst: ProblemInstance,
    lambda_grid,
    k: int,
    estimator=Estimator.TYPE1,
    seed=0,
    cfg: RunConfig | None = None,
    workers: int = 1,
) -> list:
    """k-fold CV error at every penalty of a descending grid.

    Per-observation held-out terms are stored in the original row order, so
    ``k = M`` reproduces the leave-one-out terms. Each fold follows the grid
    with warm starts. The error bar is a bootstrap standard error over the
    ``M`` held-out terms with :data:`N_RESAMPLES` resamples.
    """
    cfg = (cfg or RunConfig()).with_grid(lambda_grid)
    estimator = Estimator(estimator)
    folds = fold_partition(inst.M, k, seed)
    grid = cfg.lambda_grid
    L = len(grid)

    def run_fold(rows):
        train = inst.drop_rows(rows)
        ws = _Workspace(train)
        out = np.empty((L, rows.size))
        x = None
        for j, lam in enumerate(grid):
            sol, report = ws.solve(lam, x, cfg)
            x = sol.x1
            if estimator is Estimator.TYPE2:
                sol = debias(train, sol)
            r = inst.y[rows] - inst.A[rows] @ sol.estimate(estimator)
            out[j] = 0.5 * r**2 if report.converged else np.nan
        return out

    terms = np.empty((L, inst.M))
    for rows, block in zip(folds, _map(run_fold, folds, workers)):
        terms[:, rows] = block

    rng = np.random.default_rng(seed)
    results = []
    for j, lam in enumerate(grid):
        est = LooEstimate.from_terms(lam, terms[j], Method.KFOLD, estimator)
        results.append(
            LooEstimate(
                est.lam, est.looe, est.per_mu_terms, _resampled_se(terms[j], rng),
                est.method, est.estimator, est.unstable, None, est.n_excluded,
            )
        )
    return results
