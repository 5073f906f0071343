import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from loewner_lab.driving import (FAMILIES, DomainError, DrivingFunction, ParameterError,
                                 holder_norm, lip_half_seminorm, make_family, omega,
                                 read_tabulated, rescale, seminorm, shift, write_tabulated)

from conftest import catalog


def test_constant_is_zero():
    lam = make_family("constant", {"c": 0.0})
    t = np.linspace(0, 1, 11)
    assert np.all(lam(t) == 0.0)


def test_spiral_endpoint():
    lam = make_family("spiral", {"kappa": 2.0})
    assert lam(1.0) == pytest.approx(2 * math.sqrt(2), abs=1e-15)


def test_linear_value():
    assert make_family("linear", {"b": 1.0})(0.25) == 0.25


@pytest.mark.parametrize("family,params,needle", [
    ("spiral", {"kappa": 4.0}, "kappa < 4"),
    ("spiral", {"kappa": 0.0}, "0 < kappa"),
    ("power", {"M": 1.0, "beta": -1.0}, "beta > 0"),
    ("weierstrass", {"M": 1.0, "beta": 2.5, "seed": 0}, "beta <= 2"),
    ("midpoint-random", {"sigma": -1.0, "seed": 0}, "sigma"),
    ("linear", {}, "missing"),
    ("nope", {}, "unknown family"),
])
def test_bad_parameters_name_the_bound(family, params, needle):
    with pytest.raises(ParameterError, match=needle):
        make_family(family, params)


def test_spiral_rejects_long_horizon():
    with pytest.raises(ParameterError, match="T <= 1"):
        make_family("spiral", {"kappa": 1.0}, T=2.0)


def test_tabulated_validation():
    with pytest.raises(ParameterError):
        make_family("tabulated", {"t": [0.0, 0.5, 0.4], "lambda": [0, 1, 2]})
    with pytest.raises(ParameterError):
        make_family("tabulated", {"t": [0.1, 0.5], "lambda": [0, 1]})


@pytest.mark.parametrize("name", [k for k in catalog()])
def test_values_finite(name):
    lam = catalog()[name]
    v = lam(np.linspace(0, lam.T, 1001))
    assert np.all(np.isfinite(v))


@pytest.mark.parametrize("name", ["linear", "polynomial", "spiral", "power"])
def test_derivative_matches_centered_difference(name):
    lam = catalog()[name]
    h = 1e-5
    t = np.linspace(0.05, 0.9 * lam.T, 50)
    fd = (lam(t + h) - lam(t - h)) / (2 * h)
    d = lam.derivative(t)
    assert np.all(np.abs(fd - d) <= 1e-3 * (1 + np.abs(d)))


@pytest.mark.parametrize("name", [k for k in catalog()])
def test_increment_matches_difference(name):
    lam = catalog()[name]
    T = lam.T
    end = np.linspace(0.3, 1.0, 7) * T
    span = 0.25 * end
    back = 0.4 * span
    got = lam.increment(end, back, span, span - back)
    ref = lam(end - back) - lam(end - span)
    assert np.allclose(got, ref, rtol=1e-10, atol=1e-13)


def test_weierstrass_integrated_derivative():
    lam = make_family("weierstrass", {"M": 1.0, "beta": 1.6, "seed": 2})
    t = np.linspace(0.1, 0.9, 30)
    h = 1e-7
    fd = (lam(t + h) - lam(t - h)) / (2 * h)
    assert np.allclose(fd, lam.derivative(t), atol=1e-6)


def test_weierstrass_normalized_seminorm():
    lam = make_family("weierstrass", {"M": 0.5, "beta": 0.75, "seed": 11})
    t = np.linspace(0, 1, 4097)
    assert seminorm(lam(t), 1 / 4096, 0.75) == pytest.approx(0.5, rel=1e-12)


def test_midpoint_random_seminorm_is_sigma():
    lam = make_family("midpoint-random", {"sigma": 0.5, "seed": 4})
    assert lip_half_seminorm(lam, 2048).value == pytest.approx(0.5, rel=1e-9)


def test_seed_reproducible():
    a = make_family("midpoint-random", {"sigma": 0.5, "seed": 9})
    b = make_family("midpoint-random", {"sigma": 0.5, "seed": 9})
    c = make_family("midpoint-random", {"sigma": 0.5, "seed": 10})
    t = np.linspace(0, 1, 100)
    assert np.array_equal(a(t), b(t))
    assert not np.array_equal(a(t), c(t))


# seminorms --------------------------------------------------------------------

def test_lip_half_constant():
    assert lip_half_seminorm(make_family("constant", {"c": 3.0})).value == 0.0


def test_lip_half_spiral_bounded_by_sigma():
    lam = make_family("spiral", {"kappa": 1.0})
    v1 = lip_half_seminorm(lam, 1024).value
    v2 = lip_half_seminorm(lam, 4096).value
    # the pair (0, 1) attains sigma = 2 sqrt(kappa)
    assert v1 <= v2 + 1e-15
    assert v2 == pytest.approx(2.0, abs=1e-12)


def test_lip_half_linear():
    # sup of b sqrt(dt) over dt <= 1 is at dt = 1
    assert lip_half_seminorm(make_family("linear", {"b": 1.0}), 4096).value == pytest.approx(1.0, abs=1e-12)


def test_dyadic_pairs_lower_bound():
    lam = make_family("midpoint-random", {"sigma": 0.7, "seed": 1})
    a = lip_half_seminorm(lam, 1024, "dyadic-pairs").value
    b = lip_half_seminorm(lam, 1024, "all-pairs").value
    assert a <= b


@given(st.integers(0, 50))
def test_seminorm_nondecreasing_on_nested_grids(seed):
    lam = make_family("midpoint-random", {"sigma": 0.5, "seed": seed, "level": 9})
    vals = [lip_half_seminorm(lam, n).value for n in (64, 128, 256, 512)]
    assert all(x <= y + 1e-15 for x, y in zip(vals, vals[1:]))


def test_holder_norm_examples():
    assert holder_norm(make_family("constant", {"c": 0.0}), 0, 0.5).value == 0.0
    assert holder_norm(make_family("linear", {"b": 1.0}), 1, 0.5).value == pytest.approx(2.0, abs=1e-12)
    # sup |t^0.75| = 1, seminorm = 1 attained at the pair (0, 1)
    assert holder_norm(make_family("power", {"M": 1.0, "beta": 0.75}), 0, 0.75).value == pytest.approx(2.0, abs=1e-12)


def test_holder_norm_fd_fallback():
    t = np.linspace(0, 1, 4097)
    lam = make_family("tabulated", {"t": t, "lambda": 2.0 * t})
    assert holder_norm(lam, 1, 0.5).value == pytest.approx(4.0, abs=1e-6)


# transforms -------------------------------------------------------------------

def test_rescale_linear():
    lam = make_family("linear", {"b": 2.0}, T=4.0)
    r = rescale(lam)
    s = np.linspace(0, 1, 9)
    assert r.T == 1.0
    assert np.allclose(r(s), 2.0 * 2.0 * s)


def test_rescale_constant_and_spiral():
    assert rescale(make_family("constant", {"c": 5.0}, T=3.0))(0.7) == 0.0
    sp = make_family("spiral", {"kappa": 1.0})
    s = np.linspace(0, 1, 33)
    assert np.allclose(rescale(sp)(s), sp(s), atol=1e-15)


@pytest.mark.parametrize("name", ["linear", "power", "weierstrass", "midpoint-random", "spiral"])
@pytest.mark.parametrize("T", [0.25, 1.0])
def test_rescale_preserves_lip_half(name, T):
    base = catalog()[name]
    lam = base if T == base.T else make_family(base.family, dict(base.params), T=T)
    a = lip_half_seminorm(lam, 1024).value
    b = lip_half_seminorm(rescale(lam), 1024).value
    assert abs(a - b) <= 1e-6


def test_shift_linear():
    lam = shift(make_family("linear", {"b": 1.0}), 0.5)
    u = np.linspace(0, 0.5, 5)
    assert lam.T == 0.5
    assert np.allclose(lam(u), 0.5 + u)


def test_shift_composes():
    lam = make_family("weierstrass", {"M": 0.5, "beta": 0.75, "seed": 7})
    a = lam.shift(0.2).shift(0.3)
    b = lam.shift(0.5)
    u = np.linspace(0, 0.5, 41)
    assert np.allclose(a(u), b(u), atol=1e-14)


def test_shift_domain():
    with pytest.raises(DomainError):
        make_family("linear", {"b": 1.0}).shift(1.0)


# omega ------------------------------------------------------------------------

def test_omega_examples():
    assert omega(make_family("constant", {"c": 1.0}), 0.5, 0.1, 0.05) == 0.0
    assert omega(make_family("linear", {"b": 3.0}), 0.5, 0.1, 0.05) < 1e-15
    sq = make_family("power", {"M": 1.0, "beta": 2.0})
    assert omega(sq, 0.5, 0.1, 0.05) == pytest.approx(0.01, abs=1e-14)


def test_omega_domain():
    with pytest.raises(DomainError):
        omega(make_family("linear", {"b": 1.0}), 0.9, 0.1, 0.2)


@given(s=st.floats(0.1, 0.6), u=st.floats(0.01, 1.0), eps=st.floats(1e-3, 0.3))
def test_omega_power_bound(s, u, eps):
    u = u * s
    M, delta = 1.0, 0.25
    lam = make_family("power", {"M": M, "beta": 0.5 + delta})
    w = omega(lam, s, u, eps, n_grid=256)
    assert w <= 2 * M * min(u, eps) ** (0.5 + delta) + 1e-12


@pytest.mark.parametrize("lam,alpha", [
    (make_family("linear", {"b": 1.0}), 0.5),
    (make_family("power", {"M": 1.0, "beta": 2.0}), 1.0),
])
@given(s=st.floats(0.1, 0.6), u=st.floats(0.01, 1.0), eps=st.floats(1e-3, 0.3))
def test_omega_c1alpha_bound(lam, alpha, s, u, eps):
    u = u * s
    M = holder_norm(lam, 1, alpha).value
    w = omega(lam, s, u, eps, n_grid=256)
    bound = M * (eps ** alpha * u if u <= eps else u ** alpha * eps)
    assert w <= bound + 1e-12


@given(seed=st.integers(0, 100), s=st.floats(0.2, 0.6), u=st.floats(0.05, 1.0), eps=st.floats(1e-3, 0.3))
def test_omega_window_symmetry(seed, s, u, eps):
    lam = make_family("weierstrass", {"M": 0.5, "beta": 0.75, "seed": seed})
    a = omega(lam, s, u * s, eps, n_grid=128)
    b = omega(lam, s, u * s, eps, n_grid=128, swap=True)
    assert a == pytest.approx(b, abs=1e-14)


# serialization ----------------------------------------------------------------

@pytest.mark.parametrize("name", [k for k in catalog()])
def test_json_round_trip(name):
    lam = catalog()[name]
    back = DrivingFunction.from_json(lam.to_json())
    t = np.linspace(0, lam.T, 101)
    assert back.family == lam.family
    assert np.array_equal(back(t), lam(t))


def test_json_round_trip_with_ops():
    lam = make_family("linear", {"b": 1.0}, T=2.0).shift(0.5).add(0.25).bump(0.3, 1.0, 0.75)
    back = DrivingFunction.from_json(lam.to_json())
    t = np.linspace(0, lam.T, 51)
    assert back.T == lam.T
    assert np.allclose(back(t), lam(t), atol=1e-15)


def test_json_keys():
    d = json.loads(make_family("spiral", {"kappa": 1.0}).to_json())
    assert {"family", "params", "T", "seed"} <= set(d)


def test_tabulated_csv_round_trip(tmp_path):
    lam = make_family("power", {"M": 1.0, "beta": 0.75})
    p = tmp_path / "d.csv"
    write_tabulated(lam, p, 512)
    back = read_tabulated(p)
    t = np.linspace(0, 1, 513)
    assert back.family == "tabulated"
    assert np.allclose(back(t), lam(t), rtol=0, atol=1e-15)


def test_tabulated_csv_header_required(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n0,0\n1,1\n")
    with pytest.raises(ParameterError, match="header"):
        read_tabulated(p)


def test_families_listed():
    assert set(FAMILIES) >= {"constant", "linear", "spiral", "power", "weierstrass",
                             "midpoint-random", "tabulated"}
