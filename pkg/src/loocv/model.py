"""Shared domain types and run configuration."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

log = logging.getLogger(__name__)

DEFAULT_ACTIVE_THRESHOLD = 1e-6


class InvalidInstanceError(ValueError):
    """Raised when a problem instance fails validation with errors."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        msg = "; ".join(d.message for d in self.diagnostics if d.severity == "error")
        super().__init__(msg or "invalid instance")


class Estimator(enum.IntEnum):
    """Which estimator a quantity refers to: the LASSO fit or its debiased refit."""

    TYPE1 = 1
    TYPE2 = 2


class Method(str, enum.Enum):
    APPROX1 = "approx1"
    APPROX2 = "approx2"
    NAIVE = "naive"
    KFOLD = "kfold"


def _readonly(a, dtype=float):
    a = np.array(a, dtype=dtype, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    severity: str = "error"


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Design matrix ``A`` (M x N) and response ``y`` (length M).

    Construction never raises on content so that bad data can be diagnosed
    with :func:`validate_instance`; use :meth:`checked` to build-and-validate.
    """

    A: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        y = np.asarray(self.y, dtype=float).reshape(-1)
        object.__setattr__(self, "A", _readonly(A))
        object.__setattr__(self, "y", _readonly(y))

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @property
    def N(self) -> int:
        return self.A.shape[1]

    @property
    def alpha(self) -> float:
        return self.M / self.N

    @classmethod
    def checked(cls, A, y) -> "ProblemInstance":
        inst = cls(A, y)
        diags = validate_instance(inst)
        for d in diags:
            if d.severity == "warning":
                log.warning(d.message)
        if any(d.severity == "error" for d in diags):
            raise InvalidInstanceError(diags)
        return inst

    def drop_rows(self, rows) -> "ProblemInstance":
        keep = np.ones(self.M, dtype=bool)
        keep[np.asarray(rows, dtype=int)] = False
        return ProblemInstance(self.A[keep], self.y[keep])


@dataclass(frozen=True, eq=False)
class GroundTruth:
    x_hat: np.ndarray
    xi: np.ndarray
    rho_hat: float
    sigma_x2: float
    sigma_xi2: float

    def __post_init__(self):
        object.__setattr__(self, "x_hat", _readonly(self.x_hat))
        object.__setattr__(self, "xi", _readonly(self.xi))
        if not 0.0 <= self.rho_hat <= 1.0:
            raise ValueError(f"rho_hat must lie in [0, 1], got {self.rho_hat}")
        if self.sigma_x2 <= 0:
            raise ValueError("sigma_x2 must be positive")
        if self.sigma_xi2 < 0:
            raise ValueError("sigma_xi2 must be non-negative")

    @property
    def support(self) -> np.ndarray:
        return self.x_hat != 0


@dataclass(frozen=True)
class SolverReport:
    """Outcome of an iterative solve.

    ``kkt_residual`` is the absolute subgradient violation of the returned
    iterate; ``tolerance`` is the absolute threshold it was tested against.
    """

    iterations: int
    kkt_residual: float
    converged: bool
    tolerance: float = 0.0


@dataclass(frozen=True, eq=False)
class LassoSolution:
    lam: float
    x1: np.ndarray
    active_set: np.ndarray
    x2: Optional[np.ndarray] = None
    rank_deficient: bool = False
    report: Optional[SolverReport] = None

    def __post_init__(self):
        object.__setattr__(self, "x1", _readonly(self.x1))
        object.__setattr__(self, "active_set", _readonly(self.active_set, dtype=np.intp))
        if self.x2 is not None:
            object.__setattr__(self, "x2", _readonly(self.x2))

    @property
    def N(self) -> int:
        return self.x1.shape[0]

    @property
    def df(self) -> int:
        return int(self.active_set.size)

    @property
    def rho(self) -> float:
        return self.df / self.N

    @property
    def converged(self) -> bool:
        return self.report is None or self.report.converged

    def estimate(self, estimator: Estimator) -> np.ndarray:
        if Estimator(estimator) is Estimator.TYPE1:
            return self.x1
        if self.x2 is None:
            raise ValueError("debiased estimate not computed; call lasso.debias first")
        return self.x2


def active_indices(x, threshold: float = DEFAULT_ACTIVE_THRESHOLD) -> np.ndarray:
    """Indices with ``|x_i| >= threshold`` (ties count as active)."""
    return np.flatnonzero(np.abs(np.asarray(x)) >= threshold)


@dataclass(frozen=True)
class RunConfig:
    lambda_grid: tuple = ()
    active_threshold: float = DEFAULT_ACTIVE_THRESHOLD
    solver_tol: float = 1e-10
    max_iter: int = 100_000
    damping: float = 0.5
    seed: int = 0

    def __post_init__(self):
        grid = np.asarray(self.lambda_grid, dtype=float).reshape(-1)
        if grid.size and np.any(~np.isfinite(grid) | (grid <= 0)):
            raise ValueError("lambda_grid must contain positive finite values")
        if grid.size > 1 and np.all(np.diff(grid) > 0):
            log.info("lambda_grid given ascending; reversing to descending order")
            grid = grid[::-1]
        if grid.size > 1 and not np.all(np.diff(grid) < 0):
            raise ValueError("lambda_grid must be strictly monotone without duplicates")
        object.__setattr__(self, "lambda_grid", tuple(float(v) for v in grid))
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be positive")
        if self.active_threshold <= self.solver_tol:
            raise ValueError("active_threshold must exceed solver_tol")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")
        if not 0.0 < self.damping <= 1.0:
            raise ValueError("damping must lie in (0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")

    def with_grid(self, grid) -> "RunConfig":
        from dataclasses import replace

        return replace(self, lambda_grid=tuple(grid))


@dataclass
class PathPoint:
    """Per-lambda summary row of a regularization path run."""

    lam: float
    df: int
    rho: float
    rss1: float
    rss2: float
    looe: float
    looe_se: float
    method: str
    unstable: bool = False
    converged: bool = True
    tp: Optional[float] = None
    fp: Optional[float] = None
    extra: dict = field(default_factory=dict)


def validate_instance(inst: ProblemInstance) -> list:
    """Return one :class:`Diagnostic` per violated invariant (empty when valid)."""
    out = []
    A, y = inst.A, inst.y
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        out.append(Diagnostic("shape", f"A must be a non-empty matrix, got shape {A.shape}"))
        return out
    if y.shape[0] != A.shape[0]:
        out.append(
            Diagnostic(
                "dimension_mismatch",
                f"y has length {y.shape[0]} but A has {A.shape[0]} rows",
            )
        )
    if not np.all(np.isfinite(A)):
        bad = np.argwhere(~np.isfinite(A))[0]
        out.append(Diagnostic("non_finite", f"A contains a non-finite entry at {tuple(bad)}"))
    if not np.all(np.isfinite(y)):
        bad = int(np.flatnonzero(~np.isfinite(y))[0])
        out.append(Diagnostic("non_finite", f"y contains a non-finite entry at index {bad}"))
    if A.shape[0] >= A.shape[1]:
        out.append(
            Diagnostic(
                "overdetermined",
                f"alpha = M/N = {inst.alpha:g} >= 1; replica predictions do not apply",
                severity="warning",
            )
        )
    return out
