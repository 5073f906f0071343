"""Derivatives of the slit at its tip.

Notation: ``gamma(s - u, s)`` is the tip of the sub-slit grown over the last
``u`` units of capacity before ``s``, and ``tau = gamma(s - u, s) / sqrt(u)``.

    L(s - u, s) = int_0^u [1/2 + 2/tau(s - v, s)^2] dv / v,     L(s) = L(0, s)
    gamma'(s)   = (i / sqrt(s)) exp(L(s))
    d_s gamma(s - u, s) = 2 / gamma(s - u, s) + (i / sqrt(u)) exp(L(s - u, s)) - lam'(s - u)
    Q(s)        = int_0^s d_s gamma(s - u, s) / gamma(s - u, s)^3 du
    gamma''(s)  = 2 gamma'(s) / gamma(s)^2 - 4 gamma'(s) Q(s)

and for ``Gamma(t) = gamma(t^2)``: ``Gamma'(t) = 2i exp(L(t^2))``.

All integrands are assembled from the deviation ``e = gamma - 2i sqrt(u)``
returned by :func:`loewner_lab.slit.window_deviation`, which keeps them
accurate where the bracket above nearly cancels.
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .driving import DrivingFunction, effective_delta
from .quadrature import graded_rule
from .slit import window_deviation

N_QUAD = 2048
N_CHAIN = 256
N_OUTER = 128
N_INNER = 32


class SingularityWarning(UserWarning):
    """Integrand near ``u = 0`` does not decay as expected."""


class ConvergenceWarning(UserWarning):
    """Extrapolated estimate is not stable."""


def _q_exponent(lam: DrivingFunction) -> float:
    return 1.0 / effective_delta(lam)


def _integrand_F(e, v):
    """``[1/2 + 2/tau^2] / v`` written as ``dd (tau + 2i) / (2 tau^2 v)``, ``dd = tau - 2i``."""
    dd = e / np.sqrt(v)
    tau = 2j + dd
    return dd * (tau + 2j) / (2.0 * tau * tau * v)


def _check_decay(v, F, w, what):
    # v: the three smallest nodes, increasing; w: their weights
    a = np.abs(v * F)
    contrib = float(np.sum(np.abs(w * F)))
    if a[0] > a[2] * (1.0 + 1e-6) and contrib > 1e-8:
        warnings.warn(f"{what}: integrand does not decay towards u=0; driver may be too rough",
                      SingularityWarning, stacklevel=3)


def _L_windows(lam, s, u, n_quad, n_chain, warn=True):
    """``L(s - u_i, s)`` for an array of window lengths ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    q = _q_exponent(lam)
    x_nodes, w_nodes = graded_rule(1.0, n_quad, q)
    v = u[:, None] * x_nodes[None, :]
    w = u[:, None] * w_nodes[None, :]
    e = window_deviation(lam, np.full(v.shape, s), v, n_chain)
    F = _integrand_F(e, v)
    if warn:
        _check_decay(v[-1, :3], F[-1, :3], w[-1, :3], "L")
    return np.sum(w * F, axis=1)


def L_of(lam: DrivingFunction, s: float, n_quad: int = N_QUAD, n_chain: int = N_CHAIN) -> complex:
    """``L(s)``, graded Gauss-Legendre in ``u = s x^q`` with ``q = 1 / delta_eff``."""
    _check_time(lam, s)
    if lam.regularity <= 0.5:
        warnings.warn("driver is not Lip(1/2 + delta) for any delta > 0; L may diverge",
                      SingularityWarning, stacklevel=2)
    return complex(_L_windows(lam, s, s, n_quad, n_chain)[0])


def L_window(lam: DrivingFunction, s: float, u: float, n_quad: int = N_QUAD,
             n_chain: int = N_CHAIN) -> complex:
    """``L(s - u, s)``; equals :func:`L_of` when ``u = s``."""
    _check_time(lam, s)
    if not 0.0 < u <= s * (1 + 1e-14):
        raise ValueError(f"need 0 < u <= s, got u={u}, s={s}")
    return complex(_L_windows(lam, s, min(u, s), n_quad, n_chain)[0])


def gamma_prime(lam: DrivingFunction, s: float, n_quad: int = N_QUAD,
                n_chain: int = N_CHAIN) -> complex:
    """``gamma'(s) = (i / sqrt(s)) exp(L(s))``."""
    return 1j / math.sqrt(s) * np.exp(L_of(lam, s, n_quad, n_chain))


def tip_gamma(lam: DrivingFunction, s: float, n_chain: int = N_CHAIN) -> complex:
    """``gamma(s)`` from the full-window chain."""
    e = complex(window_deviation(lam, s, s, n_chain)[0])
    return lam.eval(0.0) + 2j * math.sqrt(s) + e


def _dgds_many(lam, s, u, n_quad, n_chain):
    u = np.atleast_1d(np.asarray(u, dtype=float))
    e = window_deviation(lam, np.full(u.shape, s), u, n_chain)
    L = _L_windows(lam, s, u, n_quad, n_chain, warn=False)
    dd = e / np.sqrt(u)
    tau = 2j + dd
    d = (1j * dd / tau + 1j * np.expm1(L)) / np.sqrt(u) - lam.slope(s - u)
    return d, e, L


def dgamma_ds(lam: DrivingFunction, s: float, u: float, n_quad: int = N_QUAD,
              n_chain: int = N_CHAIN) -> complex:
    """``d/ds gamma(s - u, s)`` by the three-term formula.

    The first two terms are combined as ``(i dd / tau + i expm1(L)) / sqrt(u)``
    so that their leading ``+-i / sqrt(u)`` parts cancel exactly.  ``lam'``
    falls back to finite differences when no closed form exists.
    """
    _check_time(lam, s)
    if not 0.0 < u <= s:
        raise ValueError(f"need 0 < u <= s, got u={u}, s={s}")
    return complex(_dgds_many(lam, s, u, n_quad, n_chain)[0][0])


def _q_exponent_Q(lam):
    alpha = min(lam.regularity - 1.0, 1.0) if lam.regularity > 1.0 else 0.5
    return 1.0 / float(np.clip(alpha - 0.5, 0.25, 0.5))


def Q_of(lam: DrivingFunction, s: float, n_outer: int = N_OUTER, n_inner: int = N_INNER,
         n_chain: int = N_CHAIN) -> complex:
    """``Q(s)``; nested graded rules (outer over ``u``, inner for each ``L(s - u, s)``)."""
    _check_time(lam, s)
    u, w = graded_rule(s, n_outer, _q_exponent_Q(lam))
    d, e, _ = _dgds_many(lam, s, u, n_inner, n_chain)
    g = 2j * np.sqrt(u) + e
    integrand = d / g ** 3
    _check_decay(u[:3], integrand[:3], w[:3], "Q")
    return complex(np.sum(w * integrand))


def gamma_second(lam: DrivingFunction, s: float, n_quad: int = N_QUAD, n_outer: int = N_OUTER,
                 n_inner: int = N_INNER, n_chain: int = N_CHAIN) -> complex:
    """``gamma''(s) = 2 gamma' / gamma^2 - 4 gamma' Q`` with ``gamma = gamma(s) - lam(0)``."""
    return gamma_frame_at(lam, s, n_quad, second=True, n_outer=n_outer, n_inner=n_inner,
                          n_chain=n_chain).gamma_second


@dataclass(frozen=True)
class TipFrame:
    s: float
    gamma: complex
    L: complex
    gamma_prime: complex
    Q: Optional[complex] = None
    gamma_second: Optional[complex] = None
    quadrature: str = ""

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, complex):
                d[k] = [v.real, v.imag]
        return d


@dataclass(frozen=True)
class GammaFrame:
    t: float
    Gamma: complex
    Gamma_prime: complex
    Gamma_second0: Optional[complex] = None

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, complex):
                d[k] = [v.real, v.imag]
        return d


def gamma_frame_at(lam: DrivingFunction, s: float, n_quad: int = N_QUAD, second: bool = False,
                   n_outer: int = N_OUTER, n_inner: int = N_INNER,
                   n_chain: int = N_CHAIN) -> TipFrame:
    """All tip quantities at ``s`` sharing one ``L(s)`` evaluation."""
    _check_time(lam, s)
    L = L_of(lam, s, n_quad, n_chain)
    gp = 1j / math.sqrt(s) * np.exp(L)
    g0 = tip_gamma(lam, s, n_chain) - lam.eval(0.0)
    Q = g2 = None
    desc = f"graded-GL q={_q_exponent(lam):g} n_quad={n_quad} chain={n_chain}+rich"
    if second:
        Q = Q_of(lam, s, n_outer, n_inner, n_chain)
        g2 = complex(2.0 * gp / g0 ** 2 - 4.0 * gp * Q)
        desc += f" Q:{n_outer}x{n_inner}"
    return TipFrame(s, complex(g0 + lam.eval(0.0)), L, complex(gp), Q, g2, desc)


def tip_frames(lam: DrivingFunction, s_values, n_quad: int = N_QUAD, second: bool = False,
               threads: int = 1, **kw):
    """Frames over a list of times, optionally on a thread pool."""
    s_values = [float(s) for s in s_values]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(lambda s: gamma_frame_at(lam, s, n_quad, second, **kw), s_values))
    return [gamma_frame_at(lam, s, n_quad, second, **kw) for s in s_values]


def frames_to_csv(frames, path=None):
    """``s,re_gamma,im_gamma,re_L,im_L,re_gp,im_gp[,re_gpp,im_gpp]`` at 17 digits."""
    second = any(f.gamma_second is not None for f in frames)
    cols = ["s", "re_gamma", "im_gamma", "re_L", "im_L", "re_gp", "im_gp"]
    if second:
        cols += ["re_gpp", "im_gpp"]
    buf = io.StringIO()
    buf.write(",".join(cols) + "\n")
    for f in frames:
        row = [f.s, f.gamma.real, f.gamma.imag, f.L.real, f.L.imag,
               f.gamma_prime.real, f.gamma_prime.imag]
        if second:
            row += [f.gamma_second.real, f.gamma_second.imag]
        buf.write(",".join(f"{x:.17g}" for x in row) + "\n")
    if path is None:
        return buf.getvalue()
    with open(path, "w", newline="\n") as fh:
        fh.write(buf.getvalue())


# ---------------------------------------------------------------------------
# Gamma(t) = gamma(t^2)

def gamma_frame(lam: DrivingFunction, t: float, n_quad: int = N_QUAD,
                n_chain: int = N_CHAIN) -> GammaFrame:
    """``Gamma(t)`` and ``Gamma'(t) = 2i exp(L(t^2))``; ``Gamma'(0) = 2i`` by convention."""
    if t == 0.0:
        return GammaFrame(0.0, complex(lam.eval(0.0)), 2j)
    s = t * t
    _check_time(lam, s)
    L = L_of(lam, s, n_quad, n_chain)
    return GammaFrame(t, tip_gamma(lam, s, n_chain), complex(2j * np.exp(L)))


def gamma_prime_series(lam: DrivingFunction, t_values, n_quad: int = 256,
                       n_chain: int = 128) -> np.ndarray:
    """``Gamma'(t)`` on many points at once (vectorized over windows)."""
    t = np.asarray(t_values, dtype=float)
    out = np.full(t.shape, 2j, dtype=complex)
    pos = t > 0
    for i in np.flatnonzero(pos):
        s = t[i] * t[i]
        out[i] = 2j * np.exp(_L_windows(lam, s, s, n_quad, n_chain, warn=False)[0])
    return out


def gamma_prime_curve(lam: DrivingFunction, s_values, n_quad: int = 256,
                      n_chain: int = 128) -> np.ndarray:
    """``gamma'(s)`` on many points."""
    s = np.asarray(s_values, dtype=float)
    out = np.empty(s.shape, dtype=complex)
    for i, si in enumerate(s):
        out[i] = 1j / math.sqrt(si) * np.exp(_L_windows(lam, si, si, n_quad, n_chain, warn=False)[0])
    return out


def gamma_second_curve(lam: DrivingFunction, s_values, n_quad: int = 256, n_outer: int = 64,
                       n_inner: int = 16, n_chain: int = 128) -> np.ndarray:
    s = np.asarray(s_values, dtype=float)
    return np.array([gamma_frame_at(lam, si, n_quad, True, n_outer, n_inner, n_chain).gamma_second
                     for si in s])


@dataclass(frozen=True)
class Gamma2Estimate:
    """Extrapolated ``Gamma''(0)`` with its spread and the predicted ``(4/3) lam'(0)``."""
    estimate: complex
    error: float
    prediction: float
    t0: float

    def to_dict(self):
        return {"estimate": [self.estimate.real, self.estimate.imag], "error": self.error,
                "prediction": self.prediction, "t0": self.t0}


def gamma_second0(lam: DrivingFunction, t0: Optional[float] = None, n_quad: int = 512,
                  n_chain: int = N_CHAIN) -> Gamma2Estimate:
    """``lim_{t -> 0} (Gamma'(t) - 2i) / t`` by three-level Richardson extrapolation.

    ``D(t) = 2i expm1(L(t^2)) / t`` is evaluated at ``t0, t0/2, t0/4`` and
    combined to cancel the ``O(t)`` and ``O(t^2)`` terms.  The reported error
    is the gap to the two-level extrapolate.
    """
    if t0 is None:
        t0 = 0.25 * math.sqrt(lam.T)
    ts = [t0, t0 / 2, t0 / 4]
    D = [2j * np.expm1(L_of(lam, t * t, n_quad, n_chain)) / t for t in ts]
    R3 = D[0] / 3.0 - 2.0 * D[1] + 8.0 / 3.0 * D[2]
    R2 = 2.0 * D[2] - D[1]
    err = float(abs(R3 - R2))
    pred = 4.0 / 3.0 * lam.slope_at_origin()
    if err > 0.1 * max(abs(R3), 1e-12) and abs(R3) > 1e-9:
        warnings.warn(f"Gamma''(0) extrapolation spread {err:.3g} exceeds 10% of |estimate|",
                      ConvergenceWarning, stacklevel=2)
    return Gamma2Estimate(complex(R3), err, float(pred), float(t0))


def _check_time(lam, s):
    if not 0.0 < s <= lam.T * (1 + 1e-14):
        raise ValueError(f"need 0 < s <= T, got s={s}, T={lam.T}")
