"""Approximate message passing for the LASSO fit and its debiased refit.

The fixed point solved for is

    a = y - A x,    h = A^T a + Gamma x,    x_i = soft(h_i, lam) / Gamma

with a single scalar ``Gamma`` (the i.i.d.-design closure
``Gamma = alpha / (1 + chi)``, ``chi = rho / Gamma``, so ``Gamma = alpha - rho``
at the fixed point). Iterates carry the Onsager memory term in the residual,
``a_t = (y - A x_t + chi_t a_{t-1}) / (1 + chi_t)``, which leaves the fixed
point unchanged but keeps the iteration stable when ``alpha - rho`` is small.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .lasso import kkt_residual
from .model import LassoSolution, ProblemInstance, RunConfig, SolverReport, active_indices

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AmpState:
    x: np.ndarray
    a: np.ndarray
    h: np.ndarray
    gamma: float
    iter: int


def _guard(y) -> float:
    return 1e6 * (1.0 + float(np.max(np.abs(y), initial=0.0)))


def _iterate(inst, denoise, x0, cfg: RunConfig, gamma_fixed=None):
    """Shared damped AMP loop; ``denoise(h, gamma) -> (x_new, n_active)``.

    With ``gamma_fixed`` the memory term is dropped and ``Gamma`` held
    constant, which turns the loop into a damped gradient iteration with the
    same fixed point.
    """
    A, y = inst.A, inst.y
    M, N = inst.M, inst.N
    alpha = inst.alpha
    x = np.zeros(N) if x0 is None else np.array(x0, dtype=float)
    a = np.zeros(M)
    chi = 0.0
    d = cfg.damping
    guard = _guard(y)
    gamma = alpha if gamma_fixed is None else gamma_fixed
    h = np.zeros(N)
    change = np.inf
    it = 0
    ok = True
    while it < cfg.max_iter:
        a = (y - A @ x + chi * a) / (1.0 + chi)
        if gamma_fixed is None:
            gamma = alpha / (1.0 + chi)
        h = A.T @ a + gamma * x
        x_new, n_active = denoise(h, gamma)
        chi_new = n_active / N / gamma
        change = float(np.max(np.abs(x_new - x), initial=0.0))
        x_next = d * x_new + (1.0 - d) * x
        it += 1
        if not np.all(np.isfinite(x_next)) or np.max(np.abs(x_next), initial=0.0) > guard:
            ok = False
            break
        if change <= cfg.solver_tol:
            # undamped output is exactly sparse and consistent with h, gamma
            x = x_new
            break
        x = x_next
        if gamma_fixed is None:
            chi = d * chi_new + (1.0 - d) * chi
    converged = ok and change <= cfg.solver_tol
    return AmpState(x, a, h, float(gamma), it), converged


def amp_solve_x1(inst: ProblemInstance, lam: float, cfg: RunConfig | None = None):
    """Damped AMP for the LASSO estimate.

    Returns ``(LassoSolution, AmpState, SolverReport)``. Divergence past the
    guard bound ``1e6 * (1 + ||y||_inf)`` stops the iteration and reports
    ``converged=False`` with the last finite state.
    """
    cfg = cfg or RunConfig()
    if lam <= 0:
        raise ValueError("lambda must be positive")

    def denoise(h, gamma):
        x = np.sign(h) * np.maximum(np.abs(h) - lam, 0.0) / gamma
        return x, int(np.count_nonzero(x))

    state, converged = _iterate(inst, denoise, None, cfg)
    x = state.x
    kkt = kkt_residual(inst, x, lam)
    report = SolverReport(state.iter, kkt, converged, cfg.solver_tol)
    sol = LassoSolution(float(lam), x, active_indices(x, cfg.active_threshold), report=report)
    return sol, state, report


def amp_solve_x2(inst: ProblemInstance, base: LassoSolution, cfg: RunConfig | None = None):
    """AMP for the debiased estimate on the support of ``base``.

    The support indicator is frozen from the LASSO fixed point and the
    denoiser is the linear map ``h / Gamma`` on it; the fixed point is the
    least-squares fit on the active columns. When the support is at least as
    large as ``M`` the closure ``Gamma = alpha - rho`` has no positive value;
    ``Gamma`` is then held at the largest eigenvalue of the active Gram
    matrix, a gradient step that reaches the same fixed point. Non-convergence
    is logged and the last finite iterate is returned.
    """
    cfg = cfg or RunConfig()
    mask = np.zeros(inst.N, dtype=bool)
    mask[base.active_set] = True
    if not mask.any():
        return np.zeros(inst.N)
    k = int(mask.sum())

    def denoise(h, gamma):
        return np.where(mask, h / gamma, 0.0), k

    gamma_fixed = None
    if k >= inst.M:
        gamma_fixed = float(np.linalg.norm(inst.A[:, mask], 2)) ** 2
    state, converged = _iterate(inst, denoise, base.x1, cfg, gamma_fixed)
    if not converged:
        log.warning("AMP for the debiased fit stopped after %d iterations without converging", state.iter)
    return state.x


def amp_kkt_violation(state: AmpState, lam: float) -> float:
    """Largest violation of the AMP-KKT correspondence at ``state``.

    Inactive coordinates need ``|h_i| <= lam``; active ones need
    ``h_i - Gamma x_i = lam*sgn(x_i)``.
    """
    x, h, g = state.x, state.h, state.gamma
    v = np.where(x != 0, np.abs(h - g * x - lam * np.sign(x)), np.abs(h) - lam)
    return max(float(v.max(initial=0.0)), 0.0)
