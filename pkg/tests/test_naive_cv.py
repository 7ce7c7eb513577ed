import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loocv.datagen import EnsembleSpec, sample_instance
from loocv.fast_loo import looe_approx1
from loocv.lasso import auto_grid, lambda_max, solve_lasso, solve_path
from loocv.metrics import argmin_lambda
from loocv.model import Estimator, Method, ProblemInstance, RunConfig
from loocv.naive_cv import fold_partition, kfold_cv, naive_loo, naive_loo_path


@pytest.fixture(scope="module")
def inst():
    return sample_instance(EnsembleSpec(64, 0.8, 0.2, 1.0, 0.001, seed=3))[0]


def _fold_lambda_max(inst):
    return max(lambda_max(inst.drop_rows([mu])) for mu in range(inst.M))


def test_all_inactive_folds(inst):
    lam = 1.01 * _fold_lambda_max(inst)
    est = naive_loo(inst, lam)
    assert est.looe == pytest.approx(0.5 * np.mean(inst.y**2), rel=1e-14)
    assert est.method is Method.NAIVE


def test_identical_observations():
    inst = ProblemInstance(np.array([[1.0], [1.0]]), np.array([1.0, 1.0]))
    est = naive_loo(inst, 1e-12)
    assert est.looe == pytest.approx(0.0, abs=1e-20)


def test_needs_two_observations():
    with pytest.raises(ValueError):
        naive_loo(ProblemInstance(np.ones((1, 2)), np.ones(1)), 0.1)


def test_agrees_with_single_fit_formula(inst):
    # at N = 64 support changes between folds leave a finite-size gap of
    # roughly 3 to 13 percent per instance on this grid
    grid = np.geomspace(0.6753221, 0.02641336, 10)
    sols = solve_path(inst, RunConfig(lambda_grid=tuple(grid)))
    naive = naive_loo_path(inst, sols)
    dev = [abs(looe_approx1(inst, s).looe - n.looe) / n.looe for s, n in zip(sols, naive)]
    assert np.mean(dev) < 0.10


def test_type2_uses_foldwise_refit(inst):
    lam = 0.1 * lambda_max(inst)
    full, _ = solve_lasso(inst, lam)
    est = naive_loo(inst, lam, Estimator.TYPE2, full=full)
    assert est.caveat is None and est.estimator is Estimator.TYPE2
    assert np.isfinite(est.looe)


def test_workers_do_not_change_result(inst):
    lam = 0.1 * lambda_max(inst)
    a = naive_loo(inst, lam, workers=1)
    b = naive_loo(inst, lam, workers=4)
    np.testing.assert_array_equal(a.per_mu_terms, b.per_mu_terms)


def test_kfold_with_k_equal_m_is_loo(inst):
    grid = np.geomspace(0.3, 0.05, 3) * lambda_max(inst)
    kf = kfold_cv(inst, grid, inst.M, seed=1)
    for est in kf:
        loo = naive_loo(inst, est.lam)
        np.testing.assert_allclose(est.per_mu_terms, loo.per_mu_terms, rtol=1e-7, atol=1e-14)
        assert est.method is Method.KFOLD


def test_kfold_above_every_fold_lambda_max(inst):
    (est,) = kfold_cv(inst, [10 * lambda_max(inst)], 5, seed=0)
    np.testing.assert_allclose(est.per_mu_terms, 0.5 * inst.y**2)
    assert est.std_error > 0


def test_single_fit_argmin_is_within_one_se_of_kfold_minimum():
    inst, _ = sample_instance(EnsembleSpec(276, 78 / 276, 0.05, 1.0, 0.01, seed=0))
    assert inst.M == 78
    grid = auto_grid(inst, n=50, decades=2)
    sols = solve_path(inst, RunConfig(lambda_grid=tuple(grid)))
    fast = [(s.lam, looe_approx1(inst, s).looe) for s in sols]
    kf = kfold_cv(inst, grid, 10, seed=0)
    i_fast = list(grid).index(argmin_lambda(fast))
    i_kf = list(grid).index(argmin_lambda([(e.lam, e.looe) for e in kf]))
    assert kf[i_fast].looe <= kf[i_kf].looe + kf[i_kf].std_error


@settings(max_examples=50, deadline=None)
@given(M=st.integers(2, 200), data=st.data())
def test_fold_partition_is_balanced_partition(M, data):
    k = data.draw(st.integers(2, M))
    folds = fold_partition(M, k, seed=data.draw(st.integers(0, 1000)))
    assert len(folds) == k
    np.testing.assert_array_equal(np.sort(np.concatenate(folds)), np.arange(M))
    sizes = [f.size for f in folds]
    assert max(sizes) - min(sizes) <= 1


def test_fold_partition_rejects_bad_k():
    with pytest.raises(ValueError):
        fold_partition(5, 1, 0)
    with pytest.raises(ValueError):
        fold_partition(5, 6, 0)
