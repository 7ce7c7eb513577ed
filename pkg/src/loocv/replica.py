"""Large-system predictions for the LASSO on i.i.d. Gaussian designs.

The signal is Bernoulli-Gaussian (fraction ``rho_hat`` of components drawn
from ``N(0, sigma_x2)``), the noise is ``N(0, sigma_xi2)`` and the design has
i.i.d. ``N(0, 1/N)`` entries with ``M = alpha N``, ``alpha < 1``. The
zero-temperature equations of state are solved by damped fixed-point
iteration, first for the LASSO order parameters ``(chi1, Q1, m1)`` and then,
with those frozen, for the debiased fit and its cross terms.

Everything downstream (RSS rates, MSEs, LOO errors, TP/FP) follows in closed
form from the fixed point.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar, root
from scipy.special import erfc, erfcx

from .model import RunConfig

log = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)
SQRT2PI = math.sqrt(2.0 * math.pi)

# fixed-point acceptance: l_inf change below EOS_TOL * (1 + |value|)
EOS_TOL = 1e-13
N_ESCALATIONS = 2
# damped iterations before the remaining distance is closed by a root solve
SLOW_ITER = 2000


class ReplicaDomainError(ValueError):
    """Parameters outside the region where the large-system analysis applies."""


class EosNonConvergence(RuntimeError):
    """Fixed-point iteration failed at every damping level; carries the last state."""

    def __init__(self, message, state):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class ReplicaParams:
    alpha: float
    rho_hat: float
    sigma_x2: float = 1.0
    sigma_xi2: float = 0.0
    lam: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ReplicaDomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.rho_hat <= 1.0:
            raise ReplicaDomainError(f"rho_hat must lie in [0, 1], got {self.rho_hat}")
        if not self.sigma_x2 > 0:
            raise ReplicaDomainError("sigma_x2 must be positive")
        if not self.sigma_xi2 >= 0:
            raise ReplicaDomainError("sigma_xi2 must be non-negative")
        if not self.lam > 0:
            raise ReplicaDomainError("lambda must be positive")

    def at(self, lam: float) -> "ReplicaParams":
        return replace(self, lam=float(lam))


# special functions ---------------------------------------------------------


def _phi(theta):
    return np.exp(-0.5 * np.square(theta)) / SQRT2PI


def gauss_tail_moment(k: int, theta):
    """``E_k(theta)``: integral of ``z^k`` against the standard normal over ``[theta, inf)``."""
    theta = np.asarray(theta, dtype=float)
    if k == 0:
        out = 0.5 * erfc(theta / SQRT2)
    elif k == 1:
        out = _phi(theta)
    elif k == 2:
        out = theta * _phi(theta) + 0.5 * erfc(theta / SQRT2)
    else:
        raise ValueError("k must be 0, 1 or 2")
    return float(out) if out.ndim == 0 else out


def _tail_square(theta):
    """``int_theta^inf (z - theta)^2 Dz = (1 + theta^2) E_0 - theta E_1`` for ``theta >= 0``.

    Written with the scaled complementary error function so that the common
    factor ``exp(-theta^2/2)`` is pulled out before the subtraction.
    """
    theta = np.asarray(theta, dtype=float)
    e0_scaled = 0.5 * erfcx(theta / SQRT2)
    return np.exp(-0.5 * theta**2) * ((1.0 + theta**2) * e0_scaled - theta / SQRT2PI)


def _F_var(theta, s2):
    """``F`` with ``lam^2 / theta^2`` supplied as the variance ``s2``; finite at ``theta = 0``."""
    return s2 * _tail_square(theta)


def _G_var(theta, s2):
    """``G`` with ``lam^2 = s2 theta^2`` substituted: ``theta phi(theta) / s2``."""
    return theta * _phi(theta) / s2


def F_func(theta, lam: float):
    """``F(theta) = lam^2 {E_0 - E_1/theta + E_0/theta^2}``.

    Evaluated as ``(lam/theta)^2 int_theta^inf (z - theta)^2 Dz``, which is
    the same function without the cancellation of the three-term form.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta <= 0):
        raise ValueError("theta must be positive")
    out = _F_var(theta, (lam / theta) ** 2)
    return float(out) if out.ndim == 0 else out


def G_func(theta, lam: float):
    """``G(theta) = theta^3 phi(theta) / lam^2``."""
    theta = np.asarray(theta, dtype=float)
    out = theta**3 * _phi(theta) / lam**2
    return float(out) if out.ndim == 0 else out


# LASSO equations of state ----------------------------------------------------


@dataclass(frozen=True)
class ReplicaState1:
    chi1: float
    Q1: float
    m1: float
    chi1_hat: float
    Q1_hat: float
    m1_hat: float
    theta_A: float
    theta_I: float
    rho: float
    TP: Optional[float]
    FP: Optional[float]
    M1_tilde: float
    eps1: float
    iterations: int = 0
    damping: float = 0.5

    @property
    def mse1(self) -> float:
        return self.M1_tilde


def _conj1(p: ReplicaParams, chi, Q, m):
    """Conjugate parameters and thresholds from ``(chi1, Q1, m1)``."""
    Mt = p.rho_hat * p.sigma_x2 - 2.0 * m + Q + p.sigma_xi2
    chih = p.alpha * Mt / (1.0 + chi) ** 2
    Qh = p.alpha / (1.0 + chi)
    s2A = chih + Qh**2 * p.sigma_x2
    s2I = chih
    return Mt, chih, Qh, s2A, s2I


def _step1(p: ReplicaParams, v):
    chi, Q, m = v
    Mt, chih, Qh, s2A, s2I = _conj1(p, chi, Q, m)
    if not (Mt > 0 and chih > 0):
        return None
    lam, rh = p.lam, p.rho_hat
    tA, tI = lam / math.sqrt(s2A), lam / math.sqrt(s2I)
    e0A, e0I = gauss_tail_moment(0, tA), gauss_tail_moment(0, tI)
    rho = 2.0 * (rh * e0A + (1.0 - rh) * e0I)
    chi_n = rho / Qh
    Q_n = 2.0 * (rh * _F_var(tA, s2A) + (1.0 - rh) * _F_var(tI, s2I)) / Qh**2
    m_n = 2.0 * rh * p.sigma_x2 * e0A
    return (chi_n, float(Q_n), m_n)


def _state1(p: ReplicaParams, v, it, damping) -> ReplicaState1:
    chi, Q, m = v
    Mt, chih, Qh, s2A, s2I = _conj1(p, chi, Q, m)
    tA, tI = p.lam / math.sqrt(s2A), p.lam / math.sqrt(s2I)
    TP = 2.0 * gauss_tail_moment(0, tA)
    FP = 2.0 * gauss_tail_moment(0, tI)
    rho = p.rho_hat * TP + (1.0 - p.rho_hat) * FP
    return ReplicaState1(
        chi, Q, m, chih, Qh, Qh, tA, tI, rho,
        TP if p.rho_hat > 0 else None,
        FP if p.rho_hat < 1 else None,
        Mt,
        chih / (2.0 * p.alpha),
        it, damping,
    )


def _fixed_point(step, v0, damping, max_iter):
    """Damped iteration of ``step``; returns ``(v, iterations, ok)``."""
    v = tuple(v0)
    for it in range(1, max_iter + 1):
        new = step(v)
        if new is None or not all(map(math.isfinite, new)):
            return v, it, False
        done = all(abs(a - b) <= EOS_TOL * (1.0 + abs(a)) for a, b in zip(new, v))
        v = tuple(damping * a + (1.0 - damping) * b for a, b in zip(new, v))
        if done:
            return v, it, True
    return v, max_iter, False


def _root_polish(step, v):
    """Newton-type solve of ``step(v) = v`` from ``v``; ``None`` unless it meets the fixed-point test."""

    def resid(u):
        out = step(tuple(u))
        if out is None:
            return np.full(len(u), 1e10)
        return np.asarray(out) - u

    try:
        sol = root(resid, np.asarray(v, dtype=float), method="hybr", options={"xtol": 1e-15})
    except (ValueError, FloatingPointError, ZeroDivisionError):
        return None
    u = tuple(float(t) for t in sol.x)
    new = step(u)
    if new is None or not all(map(math.isfinite, new)):
        return None
    if all(abs(a - b) <= EOS_TOL * (1.0 + abs(a)) for a, b in zip(new, u)):
        return new
    return None


def _solve_damped(step, v0, cfg: RunConfig, what):
    """Damped iteration with escalation; slow runs are finished by a root solve.

    Returns ``(v, iterations, damping)`` or ``(None, last)`` on failure.
    """
    d = cfg.damping
    last = None
    budget = min(cfg.max_iter, SLOW_ITER)
    for attempt in range(N_ESCALATIONS + 1):
        v, it, ok = _fixed_point(step, v0, d, budget)
        # a small step does not bound the distance to the fixed point when the
        # contraction rate is close to 1, so every run ends with a root solve
        polished = _root_polish(step, v)
        if polished is not None:
            return polished, it, d
        if ok:
            return v, it, d
        if cfg.max_iter > budget:
            v, more, ok = _fixed_point(step, v, d, cfg.max_iter - budget)
            it += more
            if ok:
                return v, it, d
        last = (v, it, d)
        log.info("%s: no convergence at damping %g, halving", what, d)
        d *= 0.5
    return None, last


def solve_eos1(p: ReplicaParams, cfg: RunConfig | None = None, init=None) -> ReplicaState1:
    """Fixed point of the LASSO equations of state at ``p.lam``.

    Starts from ``init = (chi1, Q1, m1)`` (default ``(1, rho_hat sigma_x2,
    rho_hat sigma_x2)``). On failure the damping is halved twice before
    :class:`EosNonConvergence` is raised with the last state.
    """
    cfg = cfg or RunConfig()
    if init is None:
        init = (1.0, p.rho_hat * p.sigma_x2, p.rho_hat * p.sigma_x2)
    out = _solve_damped(lambda v: _step1(p, v), init, cfg, "eos1")
    if out[0] is None:
        v, it, d = out[1]
        raise EosNonConvergence(f"LASSO equations of state did not converge at lambda={p.lam:g}", _state1(p, v, it, d))
    v, it, d = out
    return _state1(p, v, it, d)


# debiased-fit equations of state ----------------------------------------------


@dataclass(frozen=True)
class ReplicaState2:
    chi2: float
    Q2: float
    m2: float
    chi2_hat: float
    Q2_hat: float
    m2_hat: float
    chi_c: float
    Q_c: float
    chi_c_hat: float
    Q_c_hat: float
    M2_tilde: float
    Mc_tilde: float
    eps2: float
    iterations: int = 0
    damping: float = 0.5

    @property
    def mse2(self) -> float:
        return self.M2_tilde


def _conj2(p: ReplicaParams, s1: ReplicaState1, v):
    chi2, Q2, m2, chic, Qc = v
    rx = p.rho_hat * p.sigma_x2
    M2t = rx - 2.0 * m2 + Q2 + p.sigma_xi2
    Mct = rx - (s1.m1 + m2) + Qc + p.sigma_xi2
    k = chic / (1.0 + s1.chi1)
    g2 = p.alpha / (1.0 + chi2)
    # mean square of the debiased residual relative to the LASSO cavity residual
    r2 = k * k * s1.M1_tilde - 2.0 * k * Mct + M2t
    chih2 = g2 / (1.0 + chi2) * r2
    Qh2 = g2
    mh2 = g2 * (1.0 - k)
    chihc = g2 / (1.0 + s1.chi1) * (Mct - k * s1.M1_tilde)
    Qhc = g2 * k
    return M2t, Mct, r2, chih2, Qh2, mh2, chihc, Qhc


def _step2(p: ReplicaParams, s1: ReplicaState1, v):
    chi2, Q2, m2, chic, Qc = v
    _, _, _, chih2, Qh2, mh2, chihc, Qhc = _conj2(p, s1, v)
    rh, sx = p.rho_hat, p.sigma_x2
    s2A = s1.chi1_hat + s1.m1_hat**2 * sx
    s2I = s1.chi1_hat
    GA, GI = _G_var(s1.theta_A, s2A), _G_var(s1.theta_I, s2I)
    cA = chihc + s1.m1_hat * mh2 * sx
    chi2_n = s1.rho / Qh2
    Q2_n = (
        s1.rho * chih2
        + mh2**2 * s1.m1
        + 2.0 * Qhc * (chihc * s1.chi1 + mh2 * s1.m1)
        + Qhc**2 * s1.Q1
        + 2.0 * (rh * cA**2 * GA + (1.0 - rh) * chihc**2 * GI)
    ) / Qh2**2
    m2_n = (s1.m1 * (mh2 + Qhc) + 2.0 * s1.m1_hat * rh * sx * cA * GA) / Qh2
    chic_n = (Qhc * s1.chi1 + 2.0 * (rh * cA * GA + (1.0 - rh) * chihc * GI)) / Qh2
    Qc_n = (chihc * s1.chi1 + mh2 * s1.m1 + Qhc * s1.Q1) / Qh2
    return tuple(float(t) for t in (chi2_n, Q2_n, m2_n, chic_n, Qc_n))


def _state2(p, s1, v, it, damping) -> ReplicaState2:
    M2t, Mct, r2, chih2, Qh2, mh2, chihc, Qhc = _conj2(p, s1, v)
    chi2, Q2, m2, chic, Qc = v
    return ReplicaState2(
        chi2, Q2, m2, chih2, Qh2, mh2, chic, Qc, chihc, Qhc, M2t, Mct,
        chih2 / (2.0 * p.alpha), it, damping,
    )


def solve_eos2(p: ReplicaParams, s1: ReplicaState1, cfg: RunConfig | None = None, init=None) -> ReplicaState2:
    """Fixed point of the debiased-fit equations of state with ``s1`` frozen.

    ``init = (chi2, Q2, m2, chi_c, Q_c)`` defaults to the LASSO values with
    zero cross susceptibility.
    """
    cfg = cfg or RunConfig()
    if init is None:
        init = (s1.chi1, s1.Q1, s1.m1, 0.0, s1.Q1)
    out = _solve_damped(lambda v: _step2(p, s1, v), init, cfg, "eos2")
    if out[0] is None:
        v, it, d = out[1]
        raise EosNonConvergence(f"debiased equations of state did not converge at lambda={p.lam:g}", _state2(p, s1, v, it, d))
    v, it, d = out
    return _state2(p, s1, v, it, d)


def analytic_looe(p: ReplicaParams, s1: ReplicaState1, s2: ReplicaState2):
    """``(looe1, looe2_correct, looe2_incorrect)`` at a fixed point.

    The first two are half the noise-inclusive MSEs. The third is what the
    single-fit formula predicts for the debiased estimator; it vanishes as
    ``rho -> alpha`` while the true value stays finite.
    """
    k = s2.chi_c / (1.0 + s1.chi1)
    looe1 = 0.5 * s1.M1_tilde
    looe2 = 0.5 * s2.M2_tilde
    wrong = 0.5 * (k * k * s1.M1_tilde - 2.0 * k * s2.Mc_tilde + s2.M2_tilde)
    return looe1, looe2, wrong


# sweeps ------------------------------------------------------------------------


@dataclass(frozen=True)
class ReplicaPoint:
    lam: float
    rho: float
    tp: Optional[float]
    fp: Optional[float]
    eps1: float
    eps2: float
    looe1: float
    looe2_correct: float
    looe2_incorrect: float
    mse1: float
    mse2: float
    youden: Optional[float]
    converged: bool = True
    s1: Optional[ReplicaState1] = field(default=None, repr=False, compare=False)
    s2: Optional[ReplicaState2] = field(default=None, repr=False, compare=False)

    def as_record(self) -> dict:
        keys = ("lam", "rho", "tp", "fp", "eps1", "eps2", "looe1", "looe2_correct",
                "looe2_incorrect", "mse1", "mse2", "youden", "converged")
        return {k: getattr(self, k) for k in keys}


def _youden(tp, fp):
    if tp is None or fp is None:
        return None
    return 0.5 * (tp - fp) ** 2


def _point(p, s1, s2, converged=True) -> ReplicaPoint:
    l1, l2, l2w = analytic_looe(p, s1, s2)
    return ReplicaPoint(
        p.lam, s1.rho, s1.TP, s1.FP, s1.eps1, s2.eps2, l1, l2, l2w,
        s1.M1_tilde - p.sigma_xi2, s2.M2_tilde - p.sigma_xi2,
        _youden(s1.TP, s1.FP), converged, s1, s2,
    )


def solve_point(p: ReplicaParams, cfg=None, warm1=None, warm2=None) -> ReplicaPoint:
    s1 = solve_eos1(p, cfg, warm1)
    s2 = solve_eos2(p, s1, cfg, warm2)
    return _point(p, s1, s2)


def _warm(pt: Optional[ReplicaPoint]):
    if pt is None or not pt.converged:
        return None, None
    a, b = pt.s1, pt.s2
    return (a.chi1, a.Q1, a.m1), (b.chi2, b.Q2, b.m2, b.chi_c, b.Q_c)


@dataclass
class ReplicaSweep:
    params: ReplicaParams
    points: list
    min_looe1: Optional[ReplicaPoint] = None
    min_looe2: Optional[ReplicaPoint] = None
    max_youden: Optional[ReplicaPoint] = None

    def marked(self) -> dict:
        return {"min_looe1": self.min_looe1, "min_looe2": self.min_looe2, "max_youden": self.max_youden}


def _refine(p, cfg, points, idx, key, sign):
    """Optimize ``sign * key`` over log-lambda between the neighbours of grid point ``idx``."""
    if idx in (0, len(points) - 1):
        return points[idx]
    lo, hi = math.log(points[idx + 1].lam), math.log(points[idx - 1].lam)
    w1, w2 = _warm(points[idx])

    def f(t):
        try:
            return sign * getattr(solve_point(p.at(math.exp(t)), cfg, w1, w2), key)
        except EosNonConvergence:
            return math.inf

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    best = solve_point(p.at(math.exp(res.x)), cfg, w1, w2)
    return best if sign * getattr(best, key) <= sign * getattr(points[idx], key) else points[idx]


def sweep_lambda(p: ReplicaParams, lambda_grid, cfg: RunConfig | None = None, refine: bool = True) -> ReplicaSweep:
    """Analytic curves along a descending penalty grid (``p.lam`` is ignored).

    Each point warm-starts from the previous one. Points that fail to
    converge are kept with ``converged=False`` and skipped by the searches for
    the minimum of each LOO error and the maximum of Youden's index. With
    ``refine`` the marked points are polished by a bounded scalar search on
    ``log lambda`` between the grid neighbours of the discrete optimum.
    """
    cfg = cfg or RunConfig()
    grid = [float(l) for l in lambda_grid]
    if any(b >= a for a, b in zip(grid, grid[1:])):
        raise ValueError("lambda grid must be strictly descending")
    points = []
    prev = None
    for lam in grid:
        q = p.at(lam)
        w1, w2 = _warm(prev)
        try:
            pt = solve_point(q, cfg, w1, w2)
        except EosNonConvergence as exc:
            log.warning("equations of state failed at lambda=%g", lam)
            st = exc.state
            if isinstance(st, ReplicaState1):
                s2 = _state2(q, st, (st.chi1, st.Q1, st.m1, 0.0, st.Q1), 0, cfg.damping)
                pt = _point(q, st, s2, converged=False)
            else:
                pt = _point(q, solve_eos1(q, cfg, w1), st, converged=False)
        points.append(pt)
        prev = pt
    sweep = ReplicaSweep(p, points)
    ok = [i for i, pt in enumerate(points) if pt.converged]
    if len(points) < 2 or not ok:
        return sweep

    def pick(key, sign):
        vals = [(sign * getattr(points[i], key), i) for i in ok if getattr(points[i], key) is not None]
        if not vals:
            return None
        # strict comparison keeps the first (largest-lambda) optimum on ties
        best = min(vals, key=lambda t: t[0])[1]
        return _refine(p, cfg, points, best, key, sign) if refine else points[best]

    sweep.min_looe1 = pick("looe1", 1.0)
    sweep.min_looe2 = pick("looe2_correct", 1.0)
    sweep.max_youden = pick("youden", -1.0)
    return sweep


def lambda_for_rho(p: ReplicaParams, rho: float, lo: float = 1e-8, hi: float = 1e3, cfg=None) -> float:
    """Penalty at which the predicted active fraction equals ``rho``.

    ``rho`` must lie strictly between 0 and ``alpha``; the prediction is
    monotone in the penalty, so a bracketing root search on ``log lambda``
    suffices.
    """
    if not 0.0 < rho < p.alpha:
        raise ValueError("rho must lie in (0, alpha)")

    def f(t):
        return solve_eos1(p.at(math.exp(t)), cfg).rho - rho

    return math.exp(brentq(f, math.log(lo), math.log(hi), xtol=1e-12))
