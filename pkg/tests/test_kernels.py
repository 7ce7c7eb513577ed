import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loocv import _kernels

from conftest import random_instance

try:
    _kernels.get_backend("cython")
    HAVE_CYTHON = True
except ImportError:
    HAVE_CYTHON = False


def _run(backend, inst, lam, tol=1e-12):
    A = np.asfortranarray(inst.A)
    x = np.zeros(inst.N)
    r = inst.y.copy()
    col_sq = np.einsum("ij,ij->j", A, A)
    n, kkt = backend.cd_lasso(A, r, x, col_sq, lam, tol, 100_000, None)
    return x, r, n, kkt


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.get_backend("fortran")


def test_python_backend_residual_is_consistent():
    inst = random_instance(12, 20, 1)
    x, r, n, kkt = _run(_kernels.get_backend("python"), inst, 0.05)
    np.testing.assert_allclose(r, inst.y - inst.A @ x, atol=1e-12)
    assert kkt <= 1e-12


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled core not built")
@settings(max_examples=20, deadline=None)
@given(M=st.integers(2, 20), N=st.integers(2, 30), seed=st.integers(0, 10_000), lam=st.floats(0.01, 0.5))
def test_backends_agree(M, N, seed, lam):
    inst = random_instance(M, N, seed)
    xp, rp, np_, kp = _run(_kernels.get_backend("python"), inst, lam)
    xc, rc, nc, kc = _run(_kernels.get_backend("cython"), inst, lam)
    np.testing.assert_allclose(xc, xp, atol=1e-11)
    assert nc == np_


@pytest.mark.skipif(not HAVE_CYTHON, reason="compiled core not built")
def test_backends_agree_on_kkt():
    inst = random_instance(10, 15, 4)
    A = np.asfortranarray(inst.A)
    x = np.linspace(-1, 1, 15)
    r = inst.y - inst.A @ x
    a = _kernels.get_backend("python").kkt_violation(A, r, x, 0.1)
    b = _kernels.get_backend("cython").kkt_violation(A, r, x, 0.1)
    assert a == pytest.approx(b, rel=1e-12)
