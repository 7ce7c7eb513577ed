"""LASSO fits over a penalty path and the debiased least-squares refit."""

from __future__ import annotations

import logging
from dataclasses import replace

import numpy as np

from . import _kernels
from .model import LassoSolution, ProblemInstance, RunConfig, SolverReport, active_indices

log = logging.getLogger(__name__)

# KKT level (relative to 1 + ||y||) at which coordinate descent hands over to
# the exact sign-pattern solve
POLISH_TOL = 1e-6
POLISH_EVERY = 100
# sweeps after which a stalled descent hands over to the exact path
HOMOTOPY_AFTER = 1000
HOMOTOPY_MAX_STEPS = 10


def soft_threshold(h, lam: float, gamma: float = 1.0):
    """Scalar (or elementwise) map ``(h - lam*sgn(h))/gamma`` for ``|h| > lam``, else 0."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    h = np.asarray(h, dtype=float)
    out = np.sign(h) * np.maximum(np.abs(h) - lam, 0.0) / gamma
    return float(out) if out.ndim == 0 else out


def lambda_max(inst: ProblemInstance) -> float:
    """Smallest penalty at which the all-zero vector is optimal: ``||A^T y||_inf``."""
    return float(np.max(np.abs(inst.A.T @ inst.y)))


def auto_grid(inst: ProblemInstance, n: int = 50, decades: float = 4.0) -> np.ndarray:
    """``n`` log-spaced penalties from :func:`lambda_max` down ``decades`` decades."""
    lmax = lambda_max(inst)
    if lmax <= 0:
        raise ValueError("A^T y vanishes; every penalty gives the zero solution")
    return np.geomspace(lmax, lmax * 10.0 ** (-decades), n)


def rss(inst: ProblemInstance, x):
    """Return ``(E, eps)`` with ``E = 0.5*||y - A x||^2`` and ``eps = E/M``."""
    r = inst.y - inst.A @ np.asarray(x, dtype=float)
    E = 0.5 * float(r @ r)
    return E, E / inst.M


def kkt_residual(inst: ProblemInstance, x, lam: float) -> float:
    """Largest violation of the LASSO subgradient conditions at ``x``.

    Active coordinates need ``A_i^T r = lam*sgn(x_i)``; inactive ones need
    ``|A_i^T r| <= lam``. Returns 0 when both hold exactly.
    """
    x = np.asarray(x, dtype=float)
    g = inst.A.T @ (inst.y - inst.A @ x)
    v = np.where(x != 0, np.abs(g - lam * np.sign(x)), np.abs(g) - lam)
    return max(float(v.max(initial=0.0)), 0.0)


def _cho_solve(L, b):
    return np.linalg.solve(L.T, np.linalg.solve(L, b))


def _fortran(inst: ProblemInstance) -> np.ndarray:
    return np.asfortranarray(inst.A)


class _Workspace:
    """Column-major copy of ``A`` and its column norms, reused along a path."""

    def __init__(self, inst: ProblemInstance):
        self.inst = inst
        self.A = _fortran(inst)
        self.col_sq = np.einsum("ij,ij->j", self.A, self.A)
        self.tol_scale = 1.0 + float(np.linalg.norm(inst.y))

    def solve(self, lam, warm, cfg: RunConfig, trace=None):
        inst = self.inst
        x = np.zeros(inst.N) if warm is None else np.array(warm, dtype=float)
        if x.shape != (inst.N,):
            raise ValueError(f"warm start has shape {x.shape}, expected ({inst.N},)")
        r = inst.y - inst.A @ x
        tol = cfg.solver_tol * self.tol_scale
        lam = float(lam)
        sweeps = 0
        kkt = None
        if trace is None:
            budget = min(int(cfg.max_iter), HOMOTOPY_AFTER)
            x, kkt, sweeps = self._descend_and_polish(x, r, lam, tol, budget)
            if kkt is None and sweeps < cfg.max_iter:
                # descent crawls near interpolation; follow the exact path instead
                xh = self._homotopy(lam)
                if xh is not None:
                    x, r = xh, inst.y - inst.A @ xh
                    kh = kkt_residual(inst, x, lam)
                    kkt = kh if kh <= tol else None
        if kkt is None:
            more, _ = _kernels.cd_lasso(self.A, r, x, self.col_sq, lam, tol, int(cfg.max_iter) - sweeps, trace)
            sweeps += more
            kkt = kkt_residual(inst, x, lam)
        report = SolverReport(int(sweeps), kkt, kkt <= tol, tol)
        if not report.converged:
            log.warning("coordinate descent stopped at lambda=%g with KKT residual %.3g", lam, kkt)
        sol = LassoSolution(float(lam), x, active_indices(x, cfg.active_threshold), report=report)
        return sol, report

    def _descend_and_polish(self, x, r, lam, tol, budget):
        """Coordinate descent in chunks, each followed by an exact sign-pattern solve.

        Descent first aims at the loose level :data:`POLISH_TOL`, where the
        support has usually settled, then at ``tol``. Returns
        ``(x, kkt, sweeps)`` with ``kkt=None`` when nothing was certified
        within ``budget`` sweeps.
        """
        target = max(tol, POLISH_TOL * self.tol_scale)
        sweeps = 0
        while sweeps < budget:
            n, k = _kernels.cd_lasso(self.A, r, x, self.col_sq, lam, target, min(POLISH_EVERY, budget - sweeps), None)
            sweeps += n
            if k <= tol:
                return x, kkt_residual(self.inst, x, lam), sweeps
            polished = self._polish(x, lam, tol)
            if polished is not None:
                return polished[0], polished[1], sweeps
            if k <= target:
                target = tol
        return x, None, sweeps

    def _homotopy(self, lam):
        """Exact LASSO solution at ``lam`` by following the piecewise-linear path from ``lambda_max``.

        On a fixed active set ``S`` with signs ``s`` the solution is
        ``x_S = u - t w`` with ``u = G^{-1} A_S^T y``, ``w = G^{-1} s`` and
        ``G = A_S^T A_S``; the path changes only where an active coordinate
        reaches zero or an inactive correlation reaches ``+-t``. Returns
        ``None`` if the active design becomes singular or the step limit is hit.
        """
        A, y = self.A, self.inst.y
        M, N = A.shape
        c = A.T @ y
        t = float(np.max(np.abs(c)))
        x = np.zeros(N)
        if lam >= t:
            return x
        j = int(np.argmax(np.abs(c)))
        S, s = [j], [float(np.sign(c[j]))]
        last = None
        for _ in range(HOMOTOPY_MAX_STEPS * (M + N)):
            As = A[:, S]
            try:
                L = np.linalg.cholesky(As.T @ As)
            except np.linalg.LinAlgError:
                return None
            sv = np.array(s)
            u = _cho_solve(L, As.T @ y)
            w = _cho_solve(L, sv)
            p = A.T @ (y - As @ u)
            q = A.T @ (As @ w)
            inactive = np.ones(N, dtype=bool)
            inactive[S] = False
            if last is not None:
                inactive[last] = False
            ceiling = t * (1.0 - 1e-12)
            cand_t, cand = 0.0, None
            with np.errstate(divide="ignore", invalid="ignore"):
                drop = np.where(w != 0, u / w, -1.0)
                up = p / (1.0 - q)
                down = -p / (1.0 + q)
            for i, td in enumerate(drop):
                if 0 < td < ceiling and td > cand_t and S[i] != last:
                    cand_t, cand = td, ("drop", i)
            for arr, sign in ((up, 1.0), (down, -1.0)):
                ok = inactive & np.isfinite(arr) & (arr > 0) & (arr < ceiling)
                if ok.any():
                    k = int(np.flatnonzero(ok)[np.argmax(arr[ok])])
                    if arr[k] > cand_t:
                        cand_t, cand = float(arr[k]), ("add", k, sign)
            if cand is None or cand_t <= lam:
                x[S] = u - lam * w
                return x
            t = cand_t
            if cand[0] == "drop":
                last = S.pop(cand[1])
                s.pop(cand[1])
            else:
                if len(S) >= M:
                    return None
                S.append(cand[1])
                s.append(cand[2])
                last = cand[1]
        return None

    def _polish(self, x, lam, tol):
        """Exact minimizer for the sign pattern of ``x`` with its KKT residual.

        Returns ``None`` when the sign pattern is inconsistent or the
        candidate fails the certificate.
        """
        S = np.flatnonzero(x)
        if S.size == 0 or S.size > self.inst.M:
            return None
        As = self.A[:, S]
        s = np.sign(x[S])
        try:
            xs = np.linalg.solve(As.T @ As, As.T @ self.inst.y - lam * s)
        except np.linalg.LinAlgError:
            return None
        if np.any(np.sign(xs) != s):
            return None
        out = np.zeros_like(x)
        out[S] = xs
        kkt = kkt_residual(self.inst, out, lam)
        if kkt > tol:
            return None
        return out, kkt


def solve_lasso(inst: ProblemInstance, lam: float, warm=None, cfg: RunConfig | None = None, trace=None):
    """Minimize ``0.5*||y - A x||^2 + lam*||x||_1`` by cyclic coordinate descent.

    Convergence is certified by the KKT residual, not by iterate movement: the
    solve stops once every subgradient condition holds to
    ``cfg.solver_tol * (1 + ||y||)``. A solve that runs out of sweeps returns
    its last iterate with ``converged=False``.

    Returns ``(LassoSolution, SolverReport)``.
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    cfg = cfg or RunConfig()
    return _Workspace(inst).solve(lam, warm, cfg, trace)


def solve_path(inst: ProblemInstance, cfg: RunConfig, warm=None) -> list:
    """Warm-started LASSO fits along ``cfg.lambda_grid`` (descending)."""
    if not cfg.lambda_grid:
        raise ValueError("cfg.lambda_grid is empty")
    ws = _Workspace(inst)
    out = []
    x = warm
    for lam in cfg.lambda_grid:
        sol, _ = ws.solve(lam, x, cfg)
        out.append(sol)
        x = sol.x1
    return out


def debias(inst: ProblemInstance, sol: LassoSolution) -> LassoSolution:
    """Fill ``x2``: unpenalized least squares on the active columns, zero elsewhere.

    Rank-deficient active designs get the minimum-norm solution and
    ``rank_deficient=True``.
    """
    x2 = np.zeros(inst.N)
    S = sol.active_set
    deficient = False
    if S.size:
        At = inst.A[:, S]
        coef, _, rank, _ = np.linalg.lstsq(At, inst.y, rcond=None)
        deficient = rank < S.size
        x2[S] = coef
    return replace(sol, x2=x2, rank_deficient=deficient)


def debias_path(inst: ProblemInstance, sols) -> list:
    return [debias(inst, s) for s in sols]
