"""Regenerate the frozen reference values in ``tests/data/oracles.json``.

Needs mpmath, scikit-learn and scipy; the test suite itself only reads the
JSON file. Every value here is computed without the package under test,
except that the LASSO instance is drawn with its generator (the arrays are
stored, so later generator changes do not move the oracle).
"""

import json
import warnings
from pathlib import Path

import mpmath as mp
import numpy as np
from scipy import integrate, optimize
from sklearn.linear_model import Lasso

from loocv.datagen import EnsembleSpec, sample_instance

OUT = Path(__file__).resolve().parent.parent / "data" / "oracles.json"
mp.mp.dps = 40
THETAS = sorted(
    {"0.01", "0.1", "0.5", "1", "2", "4", "8"} | {f"{v:.6g}" for v in np.geomspace(0.01, 8.0, 25)}, key=float
)


def dz(z):
    return mp.exp(-z * z / 2) / mp.sqrt(2 * mp.pi)


def tail(k, theta):
    t = mp.mpf(theta)
    return mp.quad(lambda z: z**k * dz(z), [t, t + 1, t + 4, mp.inf])


def tail_square(theta):
    t = mp.mpf(theta)
    return mp.quad(lambda z: (z - t) ** 2 * dz(z), [t, t + 1, t + 4, mp.inf])


def special():
    out = []
    for th in THETAS:
        out.append(
            {
                "theta": float(th),
                "E0": float(tail(0, th)),
                "E1": float(tail(1, th)),
                "E2": float(tail(2, th)),
                # F(theta, lam=1) and G(theta, lam=1); G uses E_1 = phi
                "F1": float(tail_square(th) / mp.mpf(th) ** 2),
                "G1": float(mp.mpf(th) ** 3 * tail(1, th)),
            }
        )
    return out


def lasso_oracle():
    inst, _ = sample_instance(EnsembleSpec(40, 0.5, 0.2, 1.0, 0.01, seed=0))
    lam = 0.1 * float(np.max(np.abs(inst.A.T @ inst.y)))
    m = Lasso(alpha=lam / inst.M, fit_intercept=False, tol=1e-16, max_iter=10**7)
    m.fit(inst.A, inst.y)
    return {"A": inst.A.tolist(), "y": inst.y.tolist(), "lam": lam, "x1": m.coef_.tolist()}


def _inactive_mse(tau2, th):
    # E[soft(tau z, th)^2] for z ~ N(0, 1)
    tau = np.sqrt(tau2)
    f = lambda z: (tau * z - th) ** 2 * np.exp(-z * z / 2) / np.sqrt(2 * np.pi)
    return 2.0 * integrate.quad(f, th / tau, np.inf, epsabs=1e-15, epsrel=1e-13)[0]


def _active(tau2, th, sx):
    """MSE and activation probability for x_hat ~ N(0, sx), h = x_hat + tau z."""
    v = sx + tau2
    c = sx / v
    post = sx * tau2 / v
    dens = lambda h: np.exp(-h * h / (2 * v)) / np.sqrt(2 * np.pi * v)
    soft = lambda h: np.sign(h) * max(abs(h) - th, 0.0)
    f = lambda h: ((soft(h) - c * h) ** 2 + post) * dens(h)
    # split at the kinks of the soft threshold
    mse = sum(
        integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=500)[0]
        for a, b in [(-np.inf, -th), (-th, th), (th, np.inf)]
    )
    act = 2.0 * integrate.quad(dens, th, np.inf, epsabs=1e-15, epsrel=1e-13)[0]
    return mse, act


def _se_map(alpha, rho_hat, sx, sn, lam, rho, tau2):
    th = lam / (alpha - rho)
    mA, pA = _active(tau2, th, sx)
    mI = _inactive_mse(tau2, th)
    pI = float(mp.erfc(th / np.sqrt(2.0 * tau2)))
    mse = rho_hat * mA + (1 - rho_hat) * mI
    return rho_hat * pA + (1 - rho_hat) * pI, (sn + mse) / alpha, mse


def _se_root(alpha, rho_hat, sx, sn, lam, rho, tau2):
    def resid(u):
        r, t = alpha - np.exp(u[0]), np.exp(u[1])
        rn, tn, _ = _se_map(alpha, rho_hat, sx, sn, lam, r, t)
        return [np.log(max(alpha - rn, 1e-300)) - u[0], np.log(tn) - u[1]]

    sol = optimize.root(resid, [np.log(alpha - rho), np.log(tau2)], method="hybr", tol=1e-15)
    if not np.all(np.isfinite(sol.fun)) or max(abs(v) for v in sol.fun) > 1e-12:
        return None
    return alpha - np.exp(sol.x[0]), np.exp(sol.x[1])


def _continue(alpha, rho_hat, sx, sn, lam_from, lam_to, rho, tau2, depth=0):
    """Root solve at ``lam_to`` from the solution at ``lam_from``, halving the log-step on failure."""
    out = _se_root(alpha, rho_hat, sx, sn, lam_to, rho, tau2)
    if out is not None:
        return out
    if depth > 30:
        raise RuntimeError("continuation failed")
    mid = np.sqrt(lam_from * lam_to)
    rho, tau2 = _continue(alpha, rho_hat, sx, sn, lam_from, mid, rho, tau2, depth + 1)
    return _continue(alpha, rho_hat, sx, sn, mid, lam_to, rho, tau2, depth + 1)


def state_evolution(alpha, rho_hat, sx, sn, lam):
    """Scalar fixed point: x = soft(x_hat + tau z, lam/(alpha - rho)), tau^2 = (sn + mse)/alpha.

    Damped iteration at a large penalty, then continuation down to ``lam``
    with a root solve on ``log(alpha - rho)`` and ``log tau^2`` at each
    step, since the plain iteration stalls as rho approaches alpha.
    """
    lam0 = max(lam, 0.2)
    rho, tau2 = 0.25 * alpha, sx
    for _ in range(3000):
        rho_n, tau2_n, mse = _se_map(alpha, rho_hat, sx, sn, lam0, rho, tau2)
        rho = min(0.8 * rho + 0.2 * rho_n, 0.999 * alpha)
        tau2 = 0.8 * tau2 + 0.2 * tau2_n
    rho, tau2 = _continue(alpha, rho_hat, sx, sn, lam0, lam0, rho, tau2)
    grid = np.geomspace(lam0, lam, max(2, int(8 * np.log10(lam0 / lam)) + 2))
    for a, b in zip(grid, grid[1:]):
        rho, tau2 = _continue(alpha, rho_hat, sx, sn, a, b, rho, tau2)
    rho_n, tau2_n, mse = _se_map(alpha, rho_hat, sx, sn, lam, rho, tau2)
    assert abs(rho_n - rho) < 1e-12 and abs(tau2_n - tau2) < 1e-12 * tau2, "state evolution did not converge"
    return {"alpha": alpha, "rho_hat": rho_hat, "sigma_x2": sx, "sigma_xi2": sn, "lam": lam,
            "rho": rho, "mse": mse, "tau2": tau2}


def main():
    warnings.simplefilter("ignore")
    data = {
        "special": special(),
        "lasso_20x40": lasso_oracle(),
        "state_evolution": [
            state_evolution(0.8, 0.2, 1.0, 0.001, 0.1683),
            state_evolution(0.8, 0.2, 1.0, 0.001, 0.03),
            state_evolution(0.8, 0.2, 1.0, 0.001, 1e-4),
            state_evolution(0.5, 0.1, 1.0, 0.001, 0.05),
            state_evolution(0.5, 0.1, 1.0, 0.001, 1e-3),
        ],
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
