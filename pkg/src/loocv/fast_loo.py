"""Single-fit approximations of the leave-one-out error.

Approximation 1 rescales each residual by ``(1 + u^T chi_mu u)`` where
``chi_mu = (A_S^T A_S - u u^T)^{-1}`` is the susceptibility of the active
block with observation ``mu`` (row ``u``) removed. All ``M`` cavity
susceptibilities come from one factorization of ``A_S`` via rank-one
(Sherman-Morrison) downdates.

Approximation 2 replaces the prefactor by its large-system value
``(alpha / (alpha - rho))^2``.

Both formulas are exposed for the debiased estimator as well, but they are
known to be wrong there: support changes between folds contribute at
leading order. Those results always carry ``caveat``; the only valid
estimate of the debiased LOO error is the brute-force one in
:mod:`loocv.naive_cv`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lasso import rss
from .model import Estimator, LassoSolution, Method, ProblemInstance

log = logging.getLogger(__name__)

SM_DENOMINATOR_FLOOR = 1e-10

TYPE2_CAVEAT = (
    "single-fit approximation of the debiased LOO error is not a valid estimate; "
    "use naive_loo for the correct value"
)


@dataclass(frozen=True, eq=False)
class LooEstimate:
    lam: float
    looe: float
    per_mu_terms: np.ndarray
    std_error: float
    method: Method
    estimator: Estimator
    unstable: bool = False
    caveat: Optional[str] = None
    n_excluded: int = 0

    @classmethod
    def from_terms(cls, lam, terms, method, estimator, unstable=False, caveat=None):
        terms = np.asarray(terms, dtype=float)
        ok = np.isfinite(terms)
        kept = terms[ok]
        if kept.size == 0:
            looe, se = float("nan"), float("nan")
        else:
            looe = float(kept.mean())
            se = float(kept.std(ddof=1) / np.sqrt(kept.size)) if kept.size > 1 else 0.0
        n_excl = int((~ok).sum())
        return cls(
            float(lam),
            looe,
            terms,
            se,
            Method(method),
            Estimator(estimator),
            unstable or n_excl > 0,
            caveat,
            n_excl,
        )


class SingularPrefactorError(ValueError):
    """Raised when ``rho >= alpha`` makes the large-system prefactor diverge."""


def _residual(inst: ProblemInstance, sol: LassoSolution, estimator: Estimator) -> np.ndarray:
    return inst.y - inst.A @ sol.estimate(estimator)


def _caveat(estimator) -> Optional[str]:
    return TYPE2_CAVEAT if Estimator(estimator) is Estimator.TYPE2 else None


def _gram_inverse(At: np.ndarray):
    """Inverse of ``At^T At``; falls back to the pseudo-inverse when singular."""
    G = At.T @ At
    try:
        L = np.linalg.cholesky(G)
        Linv = np.linalg.solve(L, np.eye(G.shape[0]))
        return Linv.T @ Linv, False
    except np.linalg.LinAlgError:
        return np.linalg.pinv(G, hermitian=True), True


@dataclass(frozen=True, eq=False)
class _ActiveFactor:
    """Complete QR of the active design, ``At = Q1 R`` with ``Q = [Q1 Q2]``.

    Row ``mu`` of ``Q1`` gives the leverage ``h = |Q1[mu]|^2`` and row ``mu``
    of ``Q2`` its complement ``1 - h = |Q2[mu]|^2`` without cancellation,
    which keeps the downdate accurate when ``1 - h`` is small.
    """

    Rinv: np.ndarray
    Q1: np.ndarray
    Q2: np.ndarray

    @classmethod
    def of(cls, At: np.ndarray):
        M, k = At.shape
        if k > M:
            return None
        Q, R = np.linalg.qr(At, mode="complete")
        R = R[:k]
        d = np.abs(np.diag(R))
        if d.size and d.min() <= np.finfo(float).eps * k * d.max():
            return None
        Rinv = np.linalg.solve(R, np.eye(k))
        return cls(Rinv, Q[:, :k], Q[:, k:])

    def leverage(self):
        return np.einsum("ij,ij->i", self.Q1, self.Q1), np.einsum("ij,ij->i", self.Q2, self.Q2)

    def cavity_inverse(self, mu: int):
        """``(At^T At - u u^T)^{-1}`` for ``u = At[mu]``, or ``None`` if degenerate."""
        comp = float(self.Q2[mu] @ self.Q2[mu])
        if comp < SM_DENOMINATOR_FLOOR:
            return None
        w = self.Rinv @ self.Q1[mu]
        return self.Rinv @ self.Rinv.T + np.outer(w, w) / comp


def sherman_morrison_downdate(Ginv: np.ndarray, u: np.ndarray):
    """``(G - u u^T)^{-1}`` from ``Ginv = G^{-1}``.

    Returns ``(inverse, denominator)``; the inverse is ``None`` when
    ``|1 - u^T Ginv u|`` falls below :data:`SM_DENOMINATOR_FLOOR`.
    """
    w = Ginv @ u
    denom = 1.0 - float(u @ w)
    if abs(denom) < SM_DENOMINATOR_FLOOR:
        return None, denom
    return Ginv + np.outer(w, w) / denom, denom


def susceptibility_cavity(inst: ProblemInstance, sol: LassoSolution, mu: int, Ginv=None):
    """Active-block susceptibility with observation ``mu`` left out.

    A rank-one downdate of ``(A_S^T A_S)^{-1}``. Without ``Ginv`` the
    downdate is carried out on a QR factorization of ``A_S``; with ``Ginv``
    the plain formula of :func:`sherman_morrison_downdate` is used. When the
    downdate denominator is degenerate the left-out Gram matrix is inverted
    directly; ``None`` is returned when that matrix is singular too.
    Inactive rows and columns of the susceptibility are identically zero and
    are not stored.
    """
    S = sol.active_set
    if S.size == 0:
        return np.zeros((0, 0))
    At = inst.A[:, S]
    chi = None
    if Ginv is not None:
        chi, _ = sherman_morrison_downdate(Ginv, At[mu])
    else:
        fac = _ActiveFactor.of(At)
        if fac is not None:
            chi = fac.cavity_inverse(mu)
    if chi is not None:
        return chi
    return _direct_cavity_inverse(At, mu)


def _direct_cavity_inverse(At: np.ndarray, mu: int):
    Am = np.delete(At, mu, axis=0)
    if Am.shape[0] < Am.shape[1]:
        return None
    Q, R = np.linalg.qr(Am)
    d = np.abs(np.diag(R))
    if d.size and d.min() <= np.finfo(float).eps * Am.shape[1] * d.max():
        return None
    Rinv = np.linalg.solve(R, np.eye(R.shape[0]))
    return Rinv @ Rinv.T


def cavity_quadratic_forms(inst: ProblemInstance, sol: LassoSolution):
    """``u_mu^T chi_mu u_mu`` for every observation, plus an instability flag.

    With leverage ``h = u^T G^{-1} u`` the downdated inverse gives
    ``u^T chi_mu u = h + h^2 / (1 - h) = h / (1 - h)``. Observations whose
    cavity Gram matrix is singular get ``nan``; a singular full Gram matrix
    falls back to the pseudo-inverse and flags the result.
    """
    S = sol.active_set
    M = inst.M
    if S.size == 0:
        return np.zeros(M), False
    At = inst.A[:, S]
    fac = _ActiveFactor.of(At)
    singular = fac is None
    quad = np.full(M, np.nan)
    if singular:
        log.warning("active Gram matrix singular at lambda=%g; using pseudo-inverse", sol.lam)
        Ginv, _ = _gram_inverse(At)
        h = np.einsum("ij,ij->i", At @ Ginv, At)
        comp = 1.0 - h
    else:
        h, comp = fac.leverage()
    good = comp >= SM_DENOMINATOR_FLOOR
    quad[good] = h[good] / comp[good]
    for mu in np.flatnonzero(~good):
        chi = _direct_cavity_inverse(At, mu)
        if chi is not None:
            quad[mu] = float(At[mu] @ chi @ At[mu])
    unstable = singular or bool(np.any(~np.isfinite(quad)))
    return quad, unstable


def looe_approx1(inst: ProblemInstance, sol: LassoSolution, estimator=Estimator.TYPE1) -> LooEstimate:
    """Approximation 1: exact cavity susceptibility from one fit.

    ``term_mu = 0.5 * (1 + u_mu^T chi_mu u_mu)^2 * r_mu^2`` with ``r`` the
    residual of the chosen estimator. Observations with a singular cavity
    Gram matrix are excluded from the mean and flag the estimate unstable.
    """
    estimator = Estimator(estimator)
    r = _residual(inst, sol, estimator)
    quad, unstable = cavity_quadratic_forms(inst, sol)
    terms = 0.5 * (1.0 + quad) ** 2 * r**2
    return LooEstimate.from_terms(sol.lam, terms, Method.APPROX1, estimator, unstable, _caveat(estimator))


def large_n_prefactor(alpha: float, rho: float) -> float:
    if rho >= alpha:
        raise SingularPrefactorError(f"prefactor singular at rho = alpha (rho={rho:g}, alpha={alpha:g})")
    return (alpha / (alpha - rho)) ** 2


def looe_approx2(inst: ProblemInstance, sol: LassoSolution, estimator=Estimator.TYPE1) -> LooEstimate:
    """Approximation 2: ``(alpha/(alpha - rho))^2`` times the residual terms."""
    estimator = Estimator(estimator)
    pref = large_n_prefactor(inst.alpha, sol.rho)
    r = _residual(inst, sol, estimator)
    terms = pref * 0.5 * r**2
    return LooEstimate.from_terms(sol.lam, terms, Method.APPROX2, estimator, False, _caveat(estimator))


def prefactor_ratio(inst: ProblemInstance, sol: LassoSolution) -> float:
    """Mean exact prefactor ``(1 + u^T chi u)^2`` over its large-system value.

    A diagnostic for how well Approximation 2 stands in for Approximation 1
    on a given design; close to 1 for i.i.d. Gaussian designs.
    """
    quad, _ = cavity_quadratic_forms(inst, sol)
    exact = np.nanmean((1.0 + quad) ** 2)
    try:
        return float(exact / large_n_prefactor(inst.alpha, sol.rho))
    except SingularPrefactorError:
        return float("nan")


def aic_expansion(inst: ProblemInstance, sol: LassoSolution, estimator=Estimator.TYPE1) -> float:
    """First-order expansion of ``2 M * looe`` in ``rho / alpha``.

    Returns ``||r||^2 * (1 + 2 rho / alpha)``. For small noise and
    ``rho/alpha -> 0`` the correction approaches ``2 N rho sigma_xi^2``, the
    AIC penalty. The neglected remainder is
    ``||r||^2 * ((1 - t)^-2 - 1 - 2t)`` with ``t = rho/alpha``, which starts
    at ``3 t^2 ||r||^2``.
    """
    E, _ = rss(inst, sol.estimate(estimator))
    r2 = 2.0 * E
    return r2 * (1.0 + 2.0 * sol.rho / inst.alpha)
