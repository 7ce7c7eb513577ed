import math

import numpy as np
import pytest
from scipy.integrate import quad

from loocv.replica import (
    F_func,
    G_func,
    ReplicaDomainError,
    ReplicaParams,
    gauss_tail_moment,
    lambda_for_rho,
    solve_eos1,
    solve_eos2,
    solve_point,
    sweep_lambda,
)

P05 = ReplicaParams(0.5, 0.1, 1.0, 0.001)
P08 = ReplicaParams(0.8, 0.2, 1.0, 0.001)


def _three_term(theta, lam):
    e0, e1 = gauss_tail_moment(0, theta), gauss_tail_moment(1, theta)
    return lam**2 * (e0 - e1 / theta + e0 / theta**2)


@pytest.fixture(scope="module")
def sweep05():
    return sweep_lambda(P05, np.geomspace(5.0, 1e-3, 60))


# special functions


def test_tail_moments_at_zero():
    assert gauss_tail_moment(0, 0.0) == 0.5
    assert gauss_tail_moment(1, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-16)
    assert gauss_tail_moment(2, 0.0) == 0.5
    with pytest.raises(ValueError):
        gauss_tail_moment(3, 1.0)


def test_special_functions_match_frozen_oracle(oracles):
    for row in oracles["special"]:
        t = row["theta"]
        for k in range(3):
            assert gauss_tail_moment(k, t) == pytest.approx(row[f"E{k}"], abs=1e-15, rel=1e-14)
        assert F_func(t, 1.0) == pytest.approx(row["F1"], rel=1e-14)
        assert G_func(t, 1.0) == pytest.approx(row["G1"], rel=1e-14)


def test_E2_against_quadrature():
    ref, _ = quad(lambda z: z * z * math.exp(-z * z / 2) / math.sqrt(2 * math.pi), 1.0, math.inf, epsabs=1e-14)
    assert gauss_tail_moment(2, 1.0) == pytest.approx(ref, abs=1e-10)


def test_F_identity_and_scaling():
    ref, _ = quad(lambda z: (z - 1.0) ** 2 * math.exp(-z * z / 2) / math.sqrt(2 * math.pi), 1.0, math.inf, epsabs=1e-14)
    assert F_func(1.0, 1.0) == pytest.approx(ref, abs=1e-10)
    for t in (0.5, 1.0, 2.0, 4.0):
        assert F_func(t, 1.0) == pytest.approx(_three_term(t, 1.0), rel=1e-12)
        assert F_func(t, 3.0) == pytest.approx(9.0 * F_func(t, 1.0), rel=1e-15)
    assert F_func(40.0, 1.0) < 1e-300
    with pytest.raises(ValueError):
        F_func(0.0, 1.0)


def test_G_values_and_scaling():
    assert G_func(1.0, 1.0) == pytest.approx(math.exp(-0.5) / math.sqrt(2 * math.pi), rel=1e-15)
    assert G_func(2.0, 0.5) == pytest.approx(G_func(2.0, 1.0) / 0.25, rel=1e-15)
    assert G_func(40.0, 1.0) < 1e-300


# equations of state


def _check_identities(s1, s2, alpha):
    rho = s1.rho
    assert s1.chi1 == pytest.approx(rho / (alpha - rho), abs=1e-8)
    assert s1.Q1_hat == pytest.approx(alpha - rho, abs=1e-8)
    assert s1.eps1 == pytest.approx(s1.chi1_hat / (2 * alpha), abs=1e-10)
    assert s2.chi2 == pytest.approx(s1.chi1, rel=1e-8)


@pytest.mark.parametrize("lam", [1.0, 0.1, 0.03, 0.01])
def test_closed_form_identities(lam):
    p = P08.at(lam)
    s1 = solve_eos1(p)
    _check_identities(s1, solve_eos2(p, s1), p.alpha)


def test_identities_along_sweep(sweep05):
    for pt in sweep05.points:
        assert pt.converged
        # relative: chi grows like 1/(alpha - rho) and the residual with it
        _check_identities(pt.s1, pt.s2, P05.alpha)


def test_state_evolution_oracle(oracles):
    # scalar recursion x = soft(x_hat + tau z, lam / (alpha - rho)),
    # tau^2 = (sigma_xi^2 + mse) / alpha, integrated by quadrature
    for row in oracles["state_evolution"]:
        p = ReplicaParams(row["alpha"], row["rho_hat"], row["sigma_x2"], row["sigma_xi2"], row["lam"])
        pt = solve_point(p)
        assert pt.rho == pytest.approx(row["rho"], rel=1e-9)
        assert pt.mse1 == pytest.approx(row["mse"], rel=1e-9)


def test_large_lambda_limit():
    p = P08.at(1e3)
    pt = solve_point(p)
    zero_est = 0.5 * (p.rho_hat * p.sigma_x2 + p.sigma_xi2)
    assert pt.rho < 1e-12 and pt.tp < 1e-12 and pt.fp < 1e-12
    assert pt.eps1 == pytest.approx(zero_est, rel=1e-9)
    assert pt.eps2 == pytest.approx(pt.eps1, rel=1e-9)
    assert pt.looe1 == pytest.approx(zero_est, rel=1e-9)
    assert pt.looe2_correct == pytest.approx(zero_est, rel=1e-9)


def test_looe1_bounded_below_by_noise(sweep05):
    assert all(pt.looe1 >= P05.sigma_xi2 / 2 for pt in sweep05.points)


def test_debiased_training_error_vanishes_towards_alpha(sweep05):
    pts = [pt for pt in sweep05.points if pt.rho > 0.2]
    eps2 = [pt.eps2 for pt in pts]
    assert np.all(np.diff(eps2) < 0)
    assert eps2[-1] < 1e-3 * max(pt.eps2 for pt in sweep05.points)


def test_incorrect_debiased_estimate_vanishes(sweep05):
    last = sweep05.points[-1]
    assert last.looe2_incorrect < 0.1 * last.looe2_correct
    # the correct value approaches the LASSO curve from above
    tail = [pt for pt in sweep05.points if pt.rho > 0.45]
    gap = np.array([pt.looe2_correct - pt.looe1 for pt in tail])
    assert np.all(gap > 0) and np.all(np.diff(gap) < 0)


def test_debiased_minimum_at_smaller_rho(sweep05):
    assert sweep05.min_looe2.rho < sweep05.min_looe1.rho
    for key in ("looe1", "looe2_correct"):
        v = np.array([getattr(pt, key) for pt in sweep05.points])
        d = np.diff(v)
        # one descent-to-ascent turn; the debiased curve may bend back down
        # towards the LASSO limit close to rho = alpha, but never turns up again
        turns_up = np.flatnonzero((d[:-1] < 0) & (d[1:] > 0))
        assert len(turns_up) == 1


def test_marked_points(sweep05):
    m = sweep05.marked()
    assert (m["min_looe1"].fp, m["min_looe1"].tp) == pytest.approx((0.24, 0.93), abs=0.01)
    assert (m["max_youden"].fp, m["max_youden"].tp) == pytest.approx((0.078, 0.87), abs=0.01)
    assert (m["min_looe2"].fp, m["min_looe2"].tp) == pytest.approx((0.068, 0.86), abs=0.01)


def test_rates_undefined_without_positives_or_negatives():
    pt = solve_point(ReplicaParams(0.5, 0.0, 1.0, 0.01, 0.1))
    assert pt.tp is None and pt.youden is None and pt.fp is not None
    pt = solve_point(ReplicaParams(0.5, 1.0, 1.0, 0.01, 1.0))
    assert pt.fp is None and pt.tp is not None


def test_single_point_sweep_has_no_marks():
    sw = sweep_lambda(P05, [0.1])
    assert len(sw.points) == 1
    assert all(v is None for v in sw.marked().values())


def test_sweep_rejects_ascending_grid():
    with pytest.raises(ValueError):
        sweep_lambda(P05, [0.1, 0.2])


@pytest.mark.parametrize("kw", [dict(alpha=1.0), dict(alpha=1.2), dict(rho_hat=-0.1), dict(lam=0.0)])
def test_domain_errors(kw):
    base = dict(alpha=0.5, rho_hat=0.1, sigma_x2=1.0, sigma_xi2=0.0, lam=1.0)
    base.update(kw)
    with pytest.raises(ReplicaDomainError):
        ReplicaParams(**base)


def test_lambda_for_rho_round_trip():
    lam = lambda_for_rho(P08, 0.3)
    assert solve_eos1(P08.at(lam)).rho == pytest.approx(0.3, abs=1e-10)
    with pytest.raises(ValueError):
        lambda_for_rho(P08, 0.8)
