"""Monte Carlo and regression experiments on slit regularity.

Every experiment returns a :class:`VerificationReport` or :class:`HolderFit`.
Random drivers are seeded per sample from ``SeedSequence([seed, index])`` so
results do not depend on the thread count or scheduling order.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .driving import DrivingFunction, make_family
from .flow import DiscretizedFlow
from .report import VerificationReport
from .slit import tip_point, trace, window_deviation
from .tip import (ConvergenceWarning, L_of, gamma_prime_curve, gamma_prime_series,
                  gamma_second_curve)

__all__ = ["HolderFit", "VerificationReport", "FitQualityError", "InsufficientScalesError",
           "sample_seed", "holder_fit", "e_sigma_sample", "lipschitz_ratio", "random_pairs",
           "common_past_divergence", "gain_experiment", "gprime_limit_check", "tip_identity_check"]


class FitQualityError(RuntimeError):
    """Log-log regression is too poor to trust (``r^2`` below threshold)."""


class InsufficientScalesError(ValueError):
    """Too few dyadic levels remain after trimming."""


@dataclass(frozen=True)
class HolderFit:
    """Least-squares fit ``log modulus = log constant + exponent * log h``."""
    exponent: float
    constant: float
    r_squared: float
    scale_range: tuple
    n_pairs: int
    lags: tuple = field(default=(), repr=False)
    moduli: tuple = field(default=(), repr=False)
    degenerate: bool = False

    def to_dict(self):
        return {"exponent": self.exponent, "constant": self.constant, "r_squared": self.r_squared,
                "scale_range": list(self.scale_range), "n_pairs": self.n_pairs,
                "lags": list(self.lags), "moduli": list(self.moduli), "degenerate": self.degenerate}


def default_threads() -> int:
    env = os.environ.get("LOEWNER_LAB_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def sample_seed(seed: int, index: int) -> int:
    """Independent 32-bit seed for sample ``index`` of a run seeded with ``seed``."""
    return int(np.random.SeedSequence([int(seed), int(index)]).generate_state(1)[0])


def _pmap(fn, items, threads):
    items = list(items)
    if threads is None:
        threads = default_threads()
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


def _loglog(h, m):
    x, y = np.log(h), np.log(m)
    A = np.vstack([x, np.ones_like(x)]).T
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    yhat = A @ np.array([slope, icpt])
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(math.exp(icpt)), float(min(max(r2, 0.0), 1.0))


def holder_fit(samples, kind: str = "function", values=None, drop: int = 2) -> HolderFit:
    """Fit a Hölder exponent from dyadic moduli of continuity.

    Parameters
    ----------
    samples : sequence of (t, value) pairs, or an array of times when
        ``values`` is given.
    kind : {'function', 'derivative'}
        ``derivative`` differentiates numerically first.
    drop : int
        Levels trimmed at each end (coarsest and finest).

    Notes
    -----
    Non-uniform samples are linearly interpolated onto a uniform grid with the
    same number of intervals.  The modulus at lag ``h_j = span 2^-j`` is the
    max over all sample pairs at that lag.
    """
    if values is None:
        pairs = list(samples)
        t = np.array([p[0] for p in pairs], dtype=float)
        v = np.array([p[1] for p in pairs], dtype=complex)
    else:
        t = np.asarray(samples, dtype=float)
        v = np.asarray(values, dtype=complex)
    if t.size < 2 ** 8:
        raise InsufficientScalesError(f"need >= 256 samples, got {t.size}")
    N = t.size - 1
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-9, atol=0):
        tu = np.linspace(t[0], t[-1], N + 1)
        v = np.interp(tu, t, v.real) + 1j * np.interp(tu, t, v.imag)
        t = tu
    h = (t[-1] - t[0]) / N
    if kind == "derivative":
        v = np.gradient(v, h)
    elif kind != "function":
        raise ValueError("kind must be 'function' or 'derivative'")
    levels = int(math.floor(math.log2(N)))
    lags = np.array([N >> j for j in range(1, levels + 1)], dtype=np.int64)
    lags = lags[lags >= 1]
    M = np.array([np.max(np.abs(v[L:] - v[:-L])) for L in lags])
    sel = slice(drop, len(lags) - drop)
    lg, mg = lags[sel], M[sel]
    if lg.size < 4:
        raise InsufficientScalesError(f"only {lg.size} dyadic levels after trimming")
    if np.any(mg <= 0):
        return HolderFit(math.nan, 0.0, 1.0, (drop + 1, len(lags) - drop), int(np.sum(N - lg + 1)),
                         tuple(int(x) for x in lags), tuple(M.tolist()), True)
    slope, const, r2 = _loglog(lg * h, mg)
    return HolderFit(slope, const, r2, (drop + 1, len(lags) - drop), int(np.sum(N - lg)),
                     tuple(int(x) for x in lags), tuple(M.tolist()))


# ---------------------------------------------------------------------------
# E_sigma

def e_sigma_sample(sigma: float, N: int, n: int, seed: int, threads: Optional[int] = None,
                   level: int = 11) -> VerificationReport:
    """Time-1 tips of ``N`` random drivers with sampled Lip(1/2) seminorm ``sigma``.

    Each tip must satisfy ``|Re| <= sigma + tol`` and
    ``Im in [sqrt(4 - sigma^2) - tol, 2 + tol]`` with ``tol = 5 / sqrt(n)``.
    Also reports the sampled diameter of the tip set and its ratio to sigma.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    tol = 5.0 / math.sqrt(n)

    def one(i):
        if sigma == 0:
            lam = make_family("constant", {"c": 0.0})
        else:
            lam = make_family("midpoint-random", {"sigma": sigma, "seed": sample_seed(seed, i),
                                                  "level": level})
        return tip_point(lam, n, grid="uniform")

    tips = np.array(_pmap(one, range(N), threads))
    lo = math.sqrt(max(4.0 - sigma * sigma, 0.0))
    m = np.minimum(np.minimum(sigma + tol - np.abs(tips.real), tips.imag - (lo - tol)),
                   2.0 + tol - tips.imag)
    margin = float(np.min(m))
    diam = float(np.max(np.abs(tips[:, None] - tips[None, :]))) if N > 1 else 0.0
    details = {"sigma": sigma, "n": n, "tol": tol, "n_fail": int(np.sum(m < 0)),
               "diam": diam, "diam_over_sigma": diam / sigma if sigma > 0 else math.nan,
               "max_abs_re": float(np.max(np.abs(tips.real))),
               "min_im": float(np.min(tips.imag)), "max_im": float(np.max(tips.imag)),
               "tips": tips}
    return VerificationReport("diam-e", margin >= 0, margin, N, seed, details)


# ---------------------------------------------------------------------------
# Lipschitz dependence on the driver

def _sup_diff(lam1, lam2, n):
    t = np.linspace(0.0, lam1.T, 4 * n + 1)
    return float(np.max(np.abs(lam1.eval(t) - lam2.eval(t))))


def lipschitz_ratio(lam1: DrivingFunction, lam2: DrivingFunction, n: int,
                    cap: float = 100.0) -> VerificationReport:
    """``sup_k |gamma1(t_k) - gamma2(t_k)| / sup |lam1 - lam2|`` on a uniform grid."""
    if abs(lam1.T - lam2.T) > 1e-12 * lam1.T:
        raise ValueError("drivers must share the horizon T")
    g1 = trace(lam1, n, grid="uniform", check_regime=False).points
    g2 = trace(lam2, n, grid="uniform", check_regime=False).points
    num = float(np.max(np.abs(g1 - g2)))
    den = _sup_diff(lam1, lam2, n)
    if den < 1e-12:
        exact = num < 1e-12
        return VerificationReport("lipschitz", exact, 0.0 if exact else -num, 1, -1,
                                  {"degenerate": True, "sup_gamma_diff": num, "sup_lambda_diff": den})
    ratio = num / den
    return VerificationReport("lipschitz", ratio <= cap and math.isfinite(ratio), cap - ratio, 1, -1,
                              {"ratio": ratio, "sup_gamma_diff": num, "sup_lambda_diff": den,
                               "n": n, "cap": cap})


def random_pairs(sigma: float, count: int, seed: int, level: int = 11):
    """``count`` pairs of independent midpoint-random drivers in ``X_sigma``."""
    out = []
    for i in range(count):
        a = make_family("midpoint-random", {"sigma": sigma, "seed": sample_seed(seed, 2 * i),
                                            "level": level})
        b = make_family("midpoint-random", {"sigma": sigma, "seed": sample_seed(seed, 2 * i + 1),
                                            "level": level})
        out.append((a, b))
    return out


def lipschitz_study(pairs, n: int, cap: float = 100.0, stability: float = 0.05,
                    threads: Optional[int] = None, seed: int = -1) -> VerificationReport:
    """Ratios at ``n`` and ``2n`` for each pair; pass if all are below ``cap`` and
    change by less than ``stability`` (relative) under refinement."""
    def one(p):
        r1 = lipschitz_ratio(p[0], p[1], n, cap).details.get("ratio", 0.0)
        r2 = lipschitz_ratio(p[0], p[1], 2 * n, cap).details.get("ratio", 0.0)
        return r1, r2

    res = np.array(_pmap(one, pairs, threads))
    r1, r2 = res[:, 0], res[:, 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(r1 > 0, np.abs(r2 - r1) / r1, 0.0)
    margin = float(min(cap - np.max(r2), stability - np.max(rel)))
    if not np.all(np.isfinite(res)):
        margin = -math.inf
    return VerificationReport("lipschitz", margin >= 0, margin, len(pairs), seed,
                              {"ratios_n": r1, "ratios_2n": r2, "max_ratio": float(np.max(r2)),
                               "max_rel_change": float(np.max(rel)), "n": n})


# ---------------------------------------------------------------------------
# maps through a shared past

def _past_flow(lam, s, n):
    # graded towards s so the discrete f_s resolves scales far below the probes
    fl = DiscretizedFlow.from_driving(lam, n, "tip", T=s, grading=2.0)
    return fl.driving_values, fl.increments


def _continued_tips(lam, s, eps, c, d, n_chain):
    e = window_deviation(lam, s + eps, eps, n_chain)
    w = c[-1] + 2j * np.sqrt(eps) + e
    return kernels.inverse_points(np.ascontiguousarray(w), c, d)


def common_past_divergence(lam_base: DrivingFunction, s: float, delta: float, N_eps: int = 10,
                           n: int = 4096, M: float = 1.0, j0: int = 3, n_chain: int = 512,
                           strict: bool = True) -> HolderFit:
    """Divergence rate of two slits whose drivers agree up to time ``s``.

    ``lam2 = lam_base + M (t - s)_+^(1/2 + delta)``.  Both tips at ``s + eps``
    are obtained as ``f_s(lam(s) + gamma(s, s + eps))`` through one shared
    discrete ``f_s``, for ``eps = 2^-j``, ``j = j0 .. j0 + N_eps - 1``, and
    ``log |gamma1 - gamma2|`` is regressed on ``log eps``.
    """
    lam2 = lam_base.bump(s, M, 0.5 + delta)
    js = np.arange(j0, j0 + N_eps, dtype=float)
    eps = 2.0 ** -js
    if s + eps[0] > lam_base.T:
        raise ValueError("s + eps exceeds T")
    c, d = _past_flow(lam_base, s, n)
    f1, _ = _continued_tips(lam_base, s, eps, c, d, n_chain)
    f2, _ = _continued_tips(lam2, s, eps, c, d, n_chain)
    D = np.abs(f1 - f2)
    rng = (int(js[0]), int(js[-1]))
    if np.all(D == 0) or M == 0:
        return HolderFit(math.nan, 0.0, 1.0, rng, N_eps, tuple(js), tuple(D), True)
    slope, const, r2 = _loglog(eps, D)
    fit = HolderFit(slope, const, r2, rng, N_eps, tuple(js), tuple(D))
    if strict and r2 < 0.95:
        raise FitQualityError(f"r^2 = {r2:.3f} < 0.95")
    return fit


def gprime_limit_check(lam: DrivingFunction, s: float, j_max: int = 12, n: int = 4096,
                       n_chain: int = 512, ratio_min: float = 1.5,
                       rel_tol: float = 0.02) -> VerificationReport:
    """Table of ``sqrt(eps) g_s'(gamma(s + eps))`` for ``eps = 2^-j``, ``j = 1..j_max``.

    Passes when every successive difference shrinks by at least ``ratio_min``
    and the last entry is within ``rel_tol`` of ``sqrt(s) exp(-L(s))``.
    """
    if not 0.0 < s < lam.T:
        raise ValueError("need 0 < s < T")
    js = np.arange(1, j_max + 1, dtype=float)
    eps = 2.0 ** -js
    keep = s + eps <= lam.T
    js, eps = js[keep], eps[keep]
    c, d = _past_flow(lam, s, n)
    _, f1 = _continued_tips(lam, s, eps, c, d, n_chain)
    vals = np.sqrt(eps) / f1
    target = math.sqrt(s) * np.exp(-L_of(lam, s))
    diffs = np.abs(np.diff(vals))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(diffs[1:] > 0, diffs[:-1] / diffs[1:], np.inf)
    rel = float(abs(vals[-1] - target) / abs(target))
    min_ratio = float(np.min(ratios)) if ratios.size else math.inf
    margin = float(min(min_ratio - ratio_min, rel_tol - rel))
    if min_ratio < ratio_min:
        warnings.warn(f"successive differences shrink by only {min_ratio:.3f}x", ConvergenceWarning,
                      stacklevel=2)
    return VerificationReport("gprime-limit", margin >= 0, margin, int(js.size), -1,
                              {"j": js, "values": vals, "ratios": ratios, "target": complex(target),
                               "rel_error": rel, "min_ratio": min_ratio,
                               "bound_ratio": np.abs(np.sqrt(eps / (s + eps)) / np.abs(f1))})


# ---------------------------------------------------------------------------
# Hölder gain

def _gain_driver(beta, M, seed, driver):
    if driver == "linear":
        return make_family("linear", {"b": M})
    if driver == "power":
        return make_family("power", {"M": M, "beta": beta})
    if driver == "weierstrass":
        return make_family("weierstrass", {"M": M, "beta": beta, "seed": seed})
    raise ValueError(f"unknown driver {driver!r}")


def gain_experiment(beta: float, M: float, seeds: Sequence[int], n: int = 4096,
                    driver: Optional[str] = None, a: float = 0.25, tol: float = 0.07,
                    n_quad: int = 128, n_chain: int = 32, threads: Optional[int] = None,
                    r2_min: float = 0.95) -> VerificationReport:
    """Fit the regularity gained by the slit over a ``C^beta`` driver.

    Regimes (``n`` is the number of sample intervals):

    * ``1/2 < beta <= 1``: exponent of ``Gamma'(t)`` on ``[0, 1]``, target ``beta - 1/2``;
    * ``1 < beta < 3/2``: exponent of ``gamma'`` on ``[a, 1]``, target ``beta - 1/2``;
    * ``beta = 3/2``: ``N = max_h omega(h) / (h log(1/h))`` for ``gamma'`` on ``[a, 1]``;
      passes if that ratio does not grow towards small ``h``;
    * ``3/2 < beta <= 2``: exponent of ``gamma''`` on ``[a, 1]``, target ``beta - 3/2``.

    ``driver`` defaults to ``linear`` (``lam = M t``) at ``beta = 1`` and to
    seeded lacunary sums otherwise.
    """
    if not 0.5 < beta <= 2.0:
        raise ValueError("beta must lie in (1/2, 2]")
    if driver is None:
        driver = "linear" if beta == 1.0 else "weierstrass"
    seeds = list(seeds) or [0]
    if driver != "weierstrass":
        seeds = seeds[:1]  # deterministic driver

    def series(seed):
        lam = _gain_driver(beta, M, seed, driver)
        if beta <= 1.0:
            t = np.linspace(0.0, math.sqrt(lam.T), n + 1)
            return t, gamma_prime_series(lam, t, n_quad, n_chain)
        s = np.linspace(a, lam.T, n + 1)
        if beta <= 1.5:
            return s, gamma_prime_curve(lam, s, n_quad, n_chain)
        return s, gamma_second_curve(lam, s, n_quad, 64, 16, n_chain)

    results = _pmap(series, seeds, threads)
    details = {"beta": beta, "M": M, "driver": driver, "seeds": seeds, "n": n}
    if beta == 1.5:
        Ns, growth = [], []
        for t, v in results:
            f = holder_fit(t, "function", values=v)
            h = np.array(f.lags) * (t[1] - t[0])
            ratio = np.array(f.moduli) / (h * np.log(1.0 / h))
            sel = slice(2, len(h) - 2)
            Ns.append(float(np.max(ratio[sel])))
            growth.append(_loglog(h[sel], ratio[sel])[0])
        margin = float(min(growth) + tol)
        details.update({"N_hat": Ns, "log_slope": growth})
        return VerificationReport("gain", margin >= 0, margin, len(seeds), seeds[0], details)
    target = beta - 0.5 if beta <= 1.5 else beta - 1.5
    fits = [holder_fit(t, "function", values=v) for t, v in results]
    ex = np.array([f.exponent for f in fits])
    r2 = np.array([f.r_squared for f in fits])
    mean = float(np.mean(ex))
    margin = float(min(tol - abs(mean - target), np.min(r2) - r2_min))
    details.update({"target": target, "exponents": ex, "r_squared": r2, "mean_exponent": mean,
                    "tol": tol, "meets_lower_bound": bool(mean >= target - tol)})
    return VerificationReport("gain", margin >= 0, margin, len(seeds),
                              int(seeds[0]) if seeds else -1, details)


def tip_identity_check(lam: DrivingFunction, t: Optional[float] = None, n_quad: int = 2048,
                       rel_tol: float = 0.02) -> VerificationReport:
    """``lam(t) - gamma(t)`` against ``int_0^t 2 / gamma(t - u, t) du``."""
    from .slit import tip_identity
    t = lam.T if t is None else t
    lhs, rhs = tip_identity(lam, t, n_quad)
    rel = abs(lhs - rhs) / max(abs(lhs), 1e-300)
    return VerificationReport("tip-identity", rel <= rel_tol, rel_tol - rel, n_quad, -1,
                              {"lhs": lhs, "rhs": rhs, "rel_error": rel, "t": t})
