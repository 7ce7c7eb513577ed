"""Inference-quality metrics against a planted signal, and penalty selection rules."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .model import GroundTruth, LassoSolution


def mse(x, truth: GroundTruth) -> float:
    """``||x - x_hat||^2 / N``."""
    x = np.asarray(x, dtype=float)
    if x.shape != truth.x_hat.shape:
        raise ValueError(f"estimate has shape {x.shape}, truth has {truth.x_hat.shape}")
    d = x - truth.x_hat
    return float(d @ d) / d.size


def tp_fp(sol: LassoSolution, truth: GroundTruth):
    """True- and false-positive ratios of the detected support.

    ``TP`` is the fraction of truly nonzero components that are active, ``FP``
    the fraction of truly zero components that are active. A ratio whose
    denominator is empty is returned as ``None``.
    """
    if sol.N != truth.x_hat.size:
        raise ValueError("solution and truth have different lengths")
    active = np.zeros(sol.N, dtype=bool)
    active[sol.active_set] = True
    pos = truth.x_hat != 0
    n_pos = int(pos.sum())
    n_neg = pos.size - n_pos
    tp = float(np.count_nonzero(active & pos)) / n_pos if n_pos else None
    fp = float(np.count_nonzero(active & ~pos)) / n_neg if n_neg else None
    return tp, fp


def youden(tp: Optional[float], fp: Optional[float]) -> Optional[float]:
    """``(TP - FP)^2 / 2``: the squared distance from ``(FP, TP)`` to the diagonal.

    ``None`` propagates when either ratio is undefined.
    """
    if tp is None or fp is None:
        return None
    return 0.5 * (tp - fp) ** 2


def argmax_youden(lams, tps, fps) -> Optional[float]:
    """Penalty maximizing Youden's index on a grid; ties go to the largest penalty."""
    best, best_lam = -np.inf, None
    for lam, tp, fp in sorted(zip(lams, tps, fps), key=lambda t: -t[0]):
        d = youden(tp, fp)
        if d is not None and d > best:
            best, best_lam = d, lam
    return best_lam


def one_standard_error(points) -> float:
    """Largest penalty whose error is within one standard error of the minimum.

    ``points`` is a sequence of ``(lam, looe, std_error)``. The threshold is
    the minimum error plus the standard error at the minimizer; when several
    penalties attain the minimum, the largest one defines it.
    """
    pts = [(float(l), float(e), float(s)) for l, e, s in points]
    if not pts:
        raise ValueError("no points to select from")
    if not all(np.isfinite(v) for p in pts for v in p):
        raise ValueError("points must be finite")
    pts.sort(key=lambda p: -p[0])
    lam_min, e_min, se_min = min(pts, key=lambda p: p[1])
    cut = e_min + se_min
    return max(l for l, e, _ in pts if e <= cut)


def argmin_lambda(points) -> float:
    """Penalty with the smallest error among ``(lam, looe, ...)``; ties go to the largest penalty."""
    pts = sorted(points, key=lambda p: -p[0])
    if not pts:
        raise ValueError("no points to select from")
    return min(pts, key=lambda p: p[1])[0]


def degrees_of_freedom(sol: LassoSolution) -> int:
    """Number of active variables."""
    return sol.df
