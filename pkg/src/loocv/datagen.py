"""Synthetic instances: i.i.d. Gaussian design, Bernoulli-Gaussian signal, Gaussian noise."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import GroundTruth, ProblemInstance


@dataclass(frozen=True)
class EnsembleSpec:
    N: int
    alpha: float
    rho_hat: float
    sigma_x2: float = 1.0
    sigma_xi2: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.rho_hat <= 1.0:
            raise ValueError(f"rho_hat must lie in [0, 1], got {self.rho_hat}")
        if self.sigma_x2 <= 0:
            raise ValueError("sigma_x2 must be positive")
        if self.sigma_xi2 < 0:
            raise ValueError("sigma_xi2 must be non-negative")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.M < 1:
            raise ValueError(f"M = round(alpha*N) = {self.M}; need at least one observation")

    @property
    def M(self) -> int:
        # Python's round() is round-half-to-even.
        return int(round(self.alpha * self.N))


def substream(seed: int, index: int = 0) -> np.random.Generator:
    """Independent generator for sample ``index`` under master ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def sample_instance(spec: EnsembleSpec, index: int = 0):
    """Draw ``(ProblemInstance, GroundTruth)`` for sample ``index`` of ``spec``.

    ``A`` has i.i.d. N(0, 1/N) entries, each signal component is nonzero with
    probability ``rho_hat`` and then N(0, sigma_x2), and the noise is
    N(0, sigma_xi2). The draw is a pure function of ``(spec, index)``.
    """
    N, M = spec.N, spec.M
    rng = substream(spec.seed, index)
    A = rng.standard_normal((M, N)) / np.sqrt(N)
    support = rng.random(N) < spec.rho_hat
    x_hat = np.where(support, rng.standard_normal(N) * np.sqrt(spec.sigma_x2), 0.0)
    xi = rng.standard_normal(M) * np.sqrt(spec.sigma_xi2)
    y = A @ x_hat + xi
    truth = GroundTruth(x_hat, xi, spec.rho_hat, spec.sigma_x2, spec.sigma_xi2)
    return ProblemInstance(A, y), truth
