"""The numba and numpy backends must agree on every kernel."""

import numpy as np
import pytest

from loewner_lab import kernels
from loewner_lab.kernels import HAVE_NUMBA, get_backend

pytestmark = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


@pytest.fixture(scope="module")
def nb():
    return get_backend("numba")


@pytest.fixture(scope="module")
def npb():
    return get_backend("numpy")


def _flow(n, seed=0):
    rng = np.random.default_rng(seed)
    c = np.cumsum(rng.normal(0, 0.05, n))
    d = rng.uniform(0.5, 1.5, n) / n
    return c, d


def test_backend_names(nb, npb):
    assert nb.name == "numba" and npb.name == "numpy"
    with pytest.raises(ValueError):
        get_backend("fortran")


def test_module_dispatch():
    assert callable(kernels.compose_tips)
    with pytest.raises(AttributeError):
        kernels.not_a_kernel


@pytest.mark.parametrize("n", [1, 7, 300])
def test_compose_tips(nb, npb, n):
    c, d = _flow(n)
    assert np.allclose(nb.compose_tips(c, d), npb.compose_tips(c, d), rtol=1e-12, atol=1e-14)


def test_window_tips(nb, npb):
    rng = np.random.default_rng(1)
    m, n = 5, 40
    c = rng.normal(0, 0.01, (m, n))
    u = rng.uniform(0.01, 1.0, m)
    x = np.linspace(0, 1, n + 1)
    H = np.sin(0.5 * np.pi * x) ** 2
    assert np.allclose(nb.window_tips(c, u, H), npb.window_tips(c, u, H), rtol=1e-12, atol=1e-15)


def test_forward_points(nb, npb):
    c, d = _flow(200, 2)
    z = np.array([0.3 + 1.2j, -2 + 0.1j, 5 + 5j, 0.0 + 0.05j, c[0] + 0.01j])
    a = nb.forward_points(z, c, d, 1e-9)
    b = npb.forward_points(z, c, d, 1e-9)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-14, equal_nan=True)


def test_inverse_points(nb, npb):
    c, d = _flow(200, 3)
    w = np.array([c[-1] + 0j, 1 + 1j, -3 + 0.2j])
    for x, y in zip(nb.inverse_points(w, c, d), npb.inverse_points(w, c, d)):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-14)


def test_reverse_ode_tips(nb, npb):
    n, S = 50, 4
    rng = np.random.default_rng(4)
    table = np.cumsum(rng.normal(0, 0.01, (n, 2 * S + 1)), axis=1)
    d = np.full(n, 1.0 / n)
    assert np.allclose(nb.reverse_ode_tips(table, d, S), npb.reverse_ode_tips(table, d, S),
                       rtol=1e-12, atol=1e-14)


def test_holder_and_lag_modulus(nb, npb):
    v = np.random.default_rng(5).normal(size=513)
    lags = np.array([1, 2, 4, 100, 512, 600], dtype=np.int64)
    assert nb.holder_lags(v, 1 / 512, 0.5, lags) == pytest.approx(npb.holder_lags(v, 1 / 512, 0.5, lags), rel=1e-14)
    lags = lags[lags < 513]
    assert np.allclose(nb.lag_modulus(v, lags), npb.lag_modulus(v, lags), rtol=1e-14)


@pytest.mark.parametrize("integrated", [False, True])
def test_trig_increment(nb, npb, integrated):
    rng = np.random.default_rng(6)
    J = 16
    ph = rng.uniform(0, 2 * np.pi, J)
    coef = 2.0 ** (-0.75 * np.arange(J))
    x = rng.uniform(0, 1, 100)
    h = 10.0 ** rng.uniform(-12, 0, 100)
    a = nb.trig_increment(x, h, np.cos(ph), np.sin(ph), coef, integrated)
    b = npb.trig_increment(x, h, np.cos(ph), np.sin(ph), coef, integrated)
    assert np.allclose(a, b, rtol=1e-11, atol=1e-15)
    fr = 2.0 ** np.arange(J)
    f = np.sin if integrated else np.cos
    ref = (f(np.multiply.outer(x + h, fr) + ph) - f(np.multiply.outer(x, fr) + ph)) @ coef
    big = h > 1e-3
    assert np.allclose(b[big], ref[big], atol=1e-12)
