import io
import json
import math

import numpy as np
import pytest

from loewner_lab.driving import make_family
from loewner_lab.flow import DiscretizedFlow, forward_map
from loewner_lab.slit import (GenerationWarning, TracedSlit, chain_grid, cone_check,
                              min_segment_separation, sub_slit_tip, tip_identity, tip_point,
                              trace, window_deviation)

from conftest import catalog

ZERO = make_family("constant", {"c": 0.0})


def test_vertical_slit_exact():
    sl = trace(ZERO, 1024)
    assert np.max(np.abs(sl.points - 2j * np.sqrt(sl.times))) <= 1e-12
    assert abs(sl.tip - 2j) <= 1e-15


@pytest.mark.parametrize("kappa", [1.0, 2.0, 3.0])
def test_spiral_tip(kappa):
    lam = make_family("spiral", {"kappa": kappa})
    z = tip_point(lam, 8192)
    assert abs(z - complex(math.sqrt(kappa), math.sqrt(4 - kappa))) <= 1e-3


def test_tip_point_matches_trace():
    lam = make_family("spiral", {"kappa": 2.0})
    with pytest.warns(GenerationWarning):
        sl = trace(lam, 512)
    assert abs(sl.tip - tip_point(lam, 512)) <= 1e-14


def test_linear_small_time_expansion():
    lam = make_family("linear", {"b": 1.0})
    z = tip_point(lam, 8192, T=0.01)
    assert abs(z - (0.01 * 2 / 3 + 0.2j)) <= 5e-4


@pytest.mark.parametrize("name", list(catalog()))
def test_trace_invariants(name):
    lam = catalog()[name]
    sl = trace(lam, 512, check_regime=False)
    assert sl.points[0] == lam(0.0)
    assert np.all(sl.points[1:].imag > 0)
    assert sl.times[0] == 0.0 and sl.times[-1] == lam.T


@pytest.mark.parametrize("name", list(catalog()))
def test_no_self_intersection(name):
    sl = trace(catalog()[name], 1024, check_regime=False)
    assert min_segment_separation(sl) > 0


def test_self_intersection_detects_crossing():
    pts = np.array([0, 1 + 1j, 2, 1 - 1j, 1 + 2j])
    sl = TracedSlit(np.arange(5.0), pts, "composition")
    assert min_segment_separation(sl) == 0.0


def test_self_intersection_skipped_for_long_traces():
    n = 2 ** 14 + 1
    sl = TracedSlit(np.linspace(0, 1, n), 2j * np.sqrt(np.linspace(0, 1, n)), "composition")
    assert min_segment_separation(sl) is None


@pytest.mark.parametrize("name", ["linear", "power", "spiral", "weierstrass", "midpoint-random"])
def test_methods_agree_and_converge(name):
    lam = catalog()[name]
    diffs = []
    for n in (256, 1024):
        a = trace(lam, n, "composition", check_regime=False).points
        b = trace(lam, n, "reverse-ode", check_regime=False).points
        diffs.append(np.max(np.abs(a - b)))
    assert diffs[1] <= 5e-3
    assert diffs[1] <= diffs[0] * 0.75 or diffs[1] < 1e-10


@pytest.mark.parametrize("name", ["linear", "power", "weierstrass", "midpoint-random"])
def test_scaling_equivariance(name):
    base = catalog()[name]
    lam = make_family(base.family, dict(base.params), T=0.25)
    n = 256
    a = trace(lam.rescale(), n, check_regime=False).points
    b = trace(lam, n, check_regime=False).points
    b = (b - b[0]) / math.sqrt(lam.T)
    assert np.max(np.abs(a - b)) <= 1e-12


@pytest.mark.parametrize("name", ["linear", "power", "spiral"])
def test_stationarity(name):
    lam = catalog()[name]
    n = 4096
    fl = DiscretizedFlow.from_driving(lam, n, "uniform")
    sl = trace(lam, n, grid="uniform", check_regime=False)
    i, j = n // 2, 3 * n // 4
    s, t = fl.times[i], fl.times[j]
    lhs = forward_map(fl, sl.points[j], s) - lam(s)
    rhs = sub_slit_tip(lam, s, t).gamma_st
    assert abs(lhs - rhs) <= 2e-3


# sub-slit tips ----------------------------------------------------------------

@pytest.mark.parametrize("s,t", [(0.0, 1.0), (0.3, 0.35), (0.9, 1.0)])
def test_sub_slit_zero_driving(s, t):
    st = sub_slit_tip(ZERO, s, t)
    assert st.gamma_st == pytest.approx(2j * math.sqrt(t - s), abs=1e-14)
    assert st.tau_st == pytest.approx(2j, abs=1e-14)


@pytest.mark.parametrize("s", [0.1, 0.5, 0.8])
def test_sub_slit_linear_shift_invariant(s):
    lam = make_family("linear", {"b": 1.0})
    u = 0.15
    a = sub_slit_tip(lam, s, s + u).gamma_st
    b = sub_slit_tip(lam, 0.0, u).gamma_st
    assert abs(a - b) <= 1e-12


def test_sub_slit_against_shifted_trace():
    lam = make_family("power", {"M": 1.0, "beta": 0.75})
    s, t = 0.5, 0.51
    got = sub_slit_tip(lam, s, t)
    shifted = lam.shift(s).add(-lam(s))
    ref = tip_point(shifted, 8192, T=t - s)
    assert abs(got.gamma_st - ref) <= 1e-5 * math.sqrt(t - s)
    # deviation from the vertical slit scales like M (t - s)^delta
    assert abs(got.tau_st - 2j) <= 2.0 * (t - s) ** 0.25


def test_sub_slit_rigidity_both_directions():
    lam = make_family("tabulated", {"t": [0.0, 0.5, 1.0], "lambda": [0.0, 0.4, 0.4]})
    assert abs(sub_slit_tip(lam, 0.6, 0.9).tau_st - 2j) <= 1e-12
    assert abs(sub_slit_tip(lam, 0.2, 0.45).tau_st - 2j) > 1e-3


def test_sub_slit_domain():
    with pytest.raises(ValueError):
        sub_slit_tip(ZERO, 0.5, 0.5)


def test_window_richardson_improves():
    lam = make_family("power", {"M": 1.0, "beta": 0.75})
    ref = window_deviation(lam, 0.9, 0.3, 2048)
    plain = window_deviation(lam, 0.9, 0.3, 64, richardson=False)
    rich = window_deviation(lam, 0.9, 0.3, 64)
    assert abs(rich - ref) < abs(plain - ref)


def test_chain_grid_endpoints():
    H, G = chain_grid(16, 3.0)
    assert H[0] == 0.0 and H[-1] == 1.0
    assert np.allclose(H + G, 1.0)
    assert np.all(np.diff(H) > 0)


# cone check -------------------------------------------------------------------

def test_cone_zero_driving():
    rep = cone_check(trace(ZERO, 256), 0.0)
    assert rep.passed
    assert rep.details["max_abs_re"] == 0.0


def test_cone_spiral_sigma_one():
    lam = make_family("spiral", {"kappa": 0.25})
    assert cone_check(trace(lam, 4096), 1.0).passed


@pytest.mark.parametrize("seed", range(1, 21))
def test_cone_midpoint_random(seed):
    lam = make_family("midpoint-random", {"sigma": 0.5, "seed": seed})
    assert cone_check(trace(lam, 1024), 0.5).passed


def test_cone_detects_violation():
    lam = make_family("linear", {"b": 3.0})
    assert not cone_check(trace(lam, 256, check_regime=False), 0.1).passed


# tip identity -----------------------------------------------------------------

@pytest.mark.parametrize("name", ["linear", "power", "spiral", "weierstrass"])
def test_tip_identity(name):
    lam = catalog()[name]
    lhs, rhs = tip_identity(lam, lam.T, 512, 128)
    assert abs(lhs - rhs) <= 0.02 * abs(lhs)


# io ---------------------------------------------------------------------------

def test_csv_format():
    text = trace(ZERO, 16).to_csv()
    lines = text.split("\n")
    assert lines[0] == "t,re,im"
    assert "\r" not in text
    assert lines[2] == "0.0625,0,0.5"
    assert len([ln for ln in lines if ln]) == 18


def test_csv_round_trip_is_lossless(tmp_path):
    sl = trace(catalog()["weierstrass"], 64)
    p = tmp_path / "s.csv"
    sl.to_csv(p)
    data = np.loadtxt(p, delimiter=",", skiprows=1)
    assert np.array_equal(data[:, 0], sl.times)
    assert np.array_equal(data[:, 1] + 1j * data[:, 2], sl.points)


def test_json_round_trip():
    sl = trace(catalog()["power"], 32)
    back = TracedSlit.from_dict(json.loads(sl.to_json()))
    assert np.array_equal(back.points, sl.points)
    assert back.driving_ref["family"] == "power"


def test_trace_arguments():
    with pytest.raises(ValueError):
        trace(ZERO, 1)
    with pytest.raises(ValueError):
        trace(ZERO, 16, method="euler")
