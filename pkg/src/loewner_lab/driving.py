"""Driving functions: the catalog of families, sampled norms, and transforms.

A :class:`DrivingFunction` is an immutable real function on ``[0, T]``.  Besides
pointwise evaluation every family supplies a *window increment*

    ``increment(end, back, span, ahead) = lam(end - back) - lam(end - span)``

with ``ahead = span - back`` passed in explicitly.  Sub-slit computations need
driving offsets over tiny windows far from the origin; forming them as a
difference of two evaluations loses everything below ``eps * |lam|``, so each
family writes the difference in closed, cancellation-free form.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels

FAMILIES = ("constant", "linear", "polynomial", "spiral", "power",
            "weierstrass", "midpoint-random", "tabulated")

#: finite-difference step (as a fraction of T) for families without lambda'
FD_STEP = 2.0 ** -20
#: one-sided difference width for lambda'(0)
FD_STEP_ORIGIN = 2.0 ** -16
DEFAULT_GRID = 4096


class ParameterError(ValueError):
    """A family parameter lies outside its admissible range."""


class DomainError(ValueError):
    """Arguments fall outside the time interval of the driving function."""


def _pow_diff(x, h, e):
    """``(x + h)_+^e - x_+^e`` without cancellation (``h >= 0``)."""
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    x, h = np.broadcast_arrays(x, h)
    out = np.empty(x.shape)
    pos = x > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        out[pos] = x[pos] ** e * np.expm1(e * np.log1p(h[pos] / x[pos]))
    y = np.maximum(x[~pos] + h[~pos], 0.0)
    out[~pos] = y ** e
    return out


def _all_pairs_seminorm(v, h, alpha):
    lags = np.arange(1, v.shape[0], dtype=np.int64)
    return float(kernels.holder_lags(np.ascontiguousarray(v, dtype=float), h, alpha, lags))


@dataclass(frozen=True, eq=False)
class DrivingFunction:
    """A real driving function on ``[0, T]``.

    Parameters
    ----------
    family : str
        One of :data:`FAMILIES`.
    params : dict
        Family parameters, JSON-serializable.
    T : float
        Time horizon (capacity units).
    seed : int, optional
        Seed for randomized families.
    ops : tuple
        Transform history applied on top of the base family (``rescale``,
        ``shift``, ``add``, ``bump``).  Kept so the function can be rebuilt
        from JSON.
    """

    family: str
    params: dict
    T: float
    seed: Optional[int] = None
    ops: tuple = ()
    regularity: float = math.inf
    tip_grading: float = 1.0
    _f: Callable = field(default=None, repr=False)
    _df: Optional[Callable] = field(default=None, repr=False)
    _inc: Optional[Callable] = field(default=None, repr=False)
    base_T: Optional[float] = field(default=None, repr=False)

    # evaluation -------------------------------------------------------------
    def __call__(self, t):
        return self.eval(t)

    def eval(self, t):
        """Values ``lam(t)``; scalar in, scalar out."""
        t = np.asarray(t, dtype=float)
        out = np.asarray(self._f(t), dtype=float)
        if out.shape != t.shape:
            out = np.broadcast_to(out, t.shape).copy()
        return float(out) if out.ndim == 0 else out

    @property
    def has_derivative(self) -> bool:
        return self._df is not None

    def derivative(self, t):
        """Closed-form ``lam'(t)``; raises if the family has none."""
        if self._df is None:
            raise AttributeError(f"{self.family} driver has no closed-form derivative")
        t = np.asarray(t, dtype=float)
        out = np.broadcast_to(np.asarray(self._df(t), dtype=float), t.shape).copy()
        return float(out) if out.ndim == 0 else out

    def slope(self, t):
        """``lam'(t)``, closed form when available else centered differences.

        The difference step is ``T * FD_STEP``; near the ends the stencil
        becomes one-sided.
        """
        if self._df is not None:
            return self.derivative(t)
        t = np.asarray(t, dtype=float)
        h = self.T * FD_STEP
        lo = np.clip(t - h, 0.0, self.T)
        hi = np.clip(t + h, 0.0, self.T)
        out = (self.eval(hi) - self.eval(lo)) / (hi - lo)
        return float(out) if np.ndim(out) == 0 else out

    def slope_at_origin(self) -> float:
        """``lam'(0)``; one-sided difference of width ``T * FD_STEP_ORIGIN`` if needed."""
        if self._df is not None:
            return float(self.derivative(0.0))
        h = self.T * FD_STEP_ORIGIN
        return (self.eval(h) - self.eval(0.0)) / h

    def increment(self, end, back, span, ahead=None):
        """``lam(end - back) - lam(end - span)``, vectorized.

        ``ahead`` must equal ``span - back``; supplying it lets families avoid
        forming the difference from rounded times.
        """
        end = np.asarray(end, dtype=float)
        back = np.asarray(back, dtype=float)
        span = np.asarray(span, dtype=float)
        if ahead is None:
            ahead = span - back
        ahead = np.asarray(ahead, dtype=float)
        if self._inc is not None:
            return np.asarray(self._inc(end, back, span, ahead), dtype=float)
        return np.asarray(self._f(end - back) - self._f(end - span), dtype=float)

    # transforms -------------------------------------------------------------
    def rescale(self) -> "DrivingFunction":
        """Brownian rescaling to ``[0, 1]``: ``(lam(sT) - lam(0)) / sqrt(T)``."""
        return _apply_op(self, ("rescale",))

    def shift(self, s: float) -> "DrivingFunction":
        """Time shift ``u -> lam(s + u)`` on ``[0, T - s]``."""
        if not 0.0 < s < self.T:
            raise DomainError(f"shift requires 0 < s < T, got s={s}, T={self.T}")
        return _apply_op(self, ("shift", float(s)))

    def add(self, c: float) -> "DrivingFunction":
        """``lam + c``."""
        return _apply_op(self, ("add", float(c)))

    def bump(self, s0: float, amp: float, expo: float) -> "DrivingFunction":
        """``lam(t) + amp * (t - s0)_+^expo``: agrees with ``lam`` up to ``s0``."""
        return _apply_op(self, ("bump", float(s0), float(amp), float(expo)))

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        d = {"family": self.family, "params": dict(self.params), "T": self.T,
             "seed": self.seed, "ops": [list(o) for o in self.ops]}
        if self.ops:
            d["base_T"] = self.base_T
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DrivingFunction":
        params = dict(d.get("params", {}))
        if d.get("seed") is not None and "seed" not in params:
            params["seed"] = d["seed"]
        base = make_family(d["family"], params, d.get("base_T") or d["T"])
        for op in d.get("ops", []):
            base = _apply_op(base, tuple(op))
        return base

    @classmethod
    def from_json(cls, s: str) -> "DrivingFunction":
        return cls.from_dict(json.loads(s))

    def describe(self) -> str:
        p = ", ".join(f"{k}={v}" for k, v in self.params.items() if k not in ("t", "lambda"))
        extra = f" ops={list(self.ops)}" if self.ops else ""
        return f"{self.family}({p}) on [0, {self.T:g}]{extra}"


def _apply_op(lam: DrivingFunction, op: tuple) -> DrivingFunction:
    f, df, inc, T = lam._f, lam._df, lam._inc, lam.T
    kind = op[0]
    if kind == "rescale":
        f0 = float(f(np.asarray(0.0)))
        rt = math.sqrt(T)
        nf = lambda x: (f(x * T) - f0) / rt
        ndf = None if df is None else (lambda x: rt * df(x * T))
        ninc = None if inc is None else (lambda e, b, s, a: inc(e * T, b * T, s * T, a * T) / rt)
        nT = 1.0
    elif kind == "shift":
        s0 = op[1]
        nf = lambda x: f(x + s0)
        ndf = None if df is None else (lambda x: df(x + s0))
        ninc = None if inc is None else (lambda e, b, s, a: inc(e + s0, b, s, a))
        nT = T - s0
    elif kind == "add":
        c = op[1]
        nf = lambda x: f(x) + c
        ndf, ninc, nT = df, inc, T
    elif kind == "bump":
        s0, amp, ex = op[1], op[2], op[3]
        nf = lambda x: f(x) + amp * np.maximum(x - s0, 0.0) ** ex
        if df is None:
            ndf = None
        else:
            def ndf(x):
                y = np.maximum(x - s0, 0.0)
                with np.errstate(divide="ignore"):
                    g = np.where(y > 0, ex * y ** (ex - 1.0), 0.0 if ex > 1 else np.inf)
                return df(x) + amp * g

        def ninc(e, b, s, a):
            base = inc(e, b, s, a) if inc is not None else f(e - b) - f(e - s)
            return base + amp * _pow_diff(e - s - s0, a, ex)
        nT = T
        reg = min(lam.regularity, ex)
        return DrivingFunction(lam.family, lam.params, nT, lam.seed, lam.ops + (op,),
                               reg, lam.tip_grading, nf, ndf, ninc, lam.base_T or T)
    else:
        raise ValueError(f"unknown transform {kind!r}")
    return DrivingFunction(lam.family, lam.params, nT, lam.seed, lam.ops + (op,),
                           lam.regularity, lam.tip_grading, nf, ndf, ninc, lam.base_T or T)


# ---------------------------------------------------------------------------
# families

def _need(params, *names):
    missing = [n for n in names if n not in params]
    if missing:
        raise ParameterError(f"missing parameter(s): {', '.join(missing)}")


def _weierstrass_terms(beta_eff, J, a, seed):
    rng = np.random.default_rng(seed)
    phases = rng.uniform(0.0, 2.0 * math.pi, J + 1)
    freqs = a ** np.arange(J + 1, dtype=float)
    amps = freqs ** (-beta_eff)
    return freqs, amps, phases


def make_family(family: str, params: Optional[dict] = None, T: float = 1.0) -> DrivingFunction:
    """Build a catalog driving function.

    Parameters
    ----------
    family : str
        ``constant`` (``c``), ``linear`` (``b``), ``polynomial`` (``coeffs``,
        lowest degree first), ``spiral`` (``kappa``), ``power`` (``M``,
        ``beta``), ``weierstrass`` (``M``, ``beta``, ``seed``, optional ``J``),
        ``midpoint-random`` (``sigma``, ``seed``, optional ``level``) or
        ``tabulated`` (``t``, ``lambda`` arrays).
    params : dict
    T : float
        Horizon, must be positive.

    Raises
    ------
    ParameterError
        With the violated bound in the message.
    """
    params = dict(params or {})
    T = float(T)
    if not T > 0:
        raise ParameterError(f"T must be positive, got {T}")
    seed = params.get("seed")

    if family == "constant":
        c = float(params.get("c", 0.0))
        params = {"c": c}
        return DrivingFunction(family, params, T, None, (), math.inf, 1.0,
                               lambda t: np.full(np.shape(t), c),
                               lambda t: np.zeros(np.shape(t)),
                               lambda e, b, s, a: np.zeros(np.broadcast(e, b, s, a).shape))

    if family == "linear":
        _need(params, "b")
        b = float(params["b"])
        return DrivingFunction(family, {"b": b}, T, None, (), math.inf, 1.0,
                               lambda t: b * t,
                               lambda t: np.full(np.shape(t), b),
                               lambda e, bk, s, a: b * a + 0.0 * e)

    if family == "polynomial":
        _need(params, "coeffs")
        co = [float(x) for x in params["coeffs"]]
        if not co:
            raise ParameterError("coeffs must be non-empty")
        dco = [i * co[i] for i in range(1, len(co))] or [0.0]

        def f(t):
            return np.polynomial.polynomial.polyval(t, co)

        def df(t):
            return np.polynomial.polynomial.polyval(t, dco)

        def inc(e, bk, s, a):
            x = e - s
            y = x + a
            # (y^i - x^i) = a * sum_j y^j x^(i-1-j)
            tot = np.zeros(np.broadcast(x, a).shape)
            for i in range(1, len(co)):
                acc = np.zeros_like(tot)
                for j in range(i):
                    acc = acc + y ** j * x ** (i - 1 - j)
                tot = tot + co[i] * acc
            return a * tot
        return DrivingFunction(family, {"coeffs": co}, T, None, (), math.inf, 1.0, f, df, inc)

    if family == "spiral":
        _need(params, "kappa")
        k = float(params["kappa"])
        if not 0.0 < k < 4.0:
            raise ParameterError(f"spiral needs 0 < kappa < 4 (kappa >= 4 does not guarantee a slit), got {k}")
        if T > 1.0:
            raise ParameterError(f"spiral needs T <= 1, got T={T}")
        sk = 2.0 * math.sqrt(k)

        def f(t):
            return sk * (1.0 - np.sqrt(np.maximum(1.0 - t, 0.0)))

        def df(t):
            with np.errstate(divide="ignore"):
                return 0.5 * sk / np.sqrt(np.maximum(1.0 - t, 0.0))

        def inc(e, bk, s, a):
            r0 = np.maximum(1.0 - e + s, 0.0)
            r1 = np.maximum(1.0 - e + bk, 0.0)
            den = np.sqrt(r0) + np.sqrt(r1)
            with np.errstate(invalid="ignore", divide="ignore"):
                return np.where(den > 0, sk * a / den, 0.0)
        grading = 4.0 / (4.0 - k) if T == 1.0 else 1.0
        return DrivingFunction(family, {"kappa": k}, T, None, (), math.inf, grading, f, df, inc)

    if family == "power":
        _need(params, "M", "beta")
        M, beta = float(params["M"]), float(params["beta"])
        if not beta > 0:
            raise ParameterError(f"power needs beta > 0, got {beta}")

        def df(t):
            with np.errstate(divide="ignore"):
                return M * beta * np.where(t > 0, np.power(np.maximum(t, 0.0), beta - 1.0),
                                           0.0 if beta > 1 else (M if beta == 1 else np.inf))
        return DrivingFunction(family, {"M": M, "beta": beta}, T, None, (), beta, 1.0,
                               lambda t: M * np.power(np.maximum(t, 0.0), beta),
                               (lambda t: np.full(np.shape(t), M)) if beta == 1.0 else df,
                               lambda e, bk, s, a: M * _pow_diff(e - s, a, beta))

    if family == "weierstrass":
        _need(params, "M", "beta", "seed")
        M, beta = float(params["M"]), float(params["beta"])
        J = int(params.get("J", 16))
        if not 0.0 < beta <= 2.0:
            raise ParameterError(f"weierstrass needs 0 < beta <= 2, got {beta}")
        a_base = 2.0
        integrated = beta > 1.0
        beta_eff = beta - 1.0 if integrated else beta
        if integrated and beta_eff <= 0:
            raise ParameterError("integrated weierstrass needs beta > 1")
        fr, am, ph = _weierstrass_terms(beta_eff, J, a_base, int(params["seed"]))

        def raw(t):
            t = np.asarray(t, dtype=float)
            return np.cos(np.multiply.outer(t, fr) + ph) @ am

        def raw_int(t):
            t = np.asarray(t, dtype=float)
            return (np.sin(np.multiply.outer(t, fr) + ph) - np.sin(ph)) @ (am / fr)

        tg = np.linspace(0.0, T, DEFAULT_GRID + 1)
        semi = _all_pairs_seminorm(raw(tg), T / DEFAULT_GRID, beta_eff)
        cb = M / semi

        coef = cb * (am / fr if integrated else am)
        cph, sph = np.cos(ph), np.sin(ph)

        def inc(e, bk, s, a):
            x, h = np.broadcast_arrays(np.asarray(e - s, dtype=float), np.asarray(a, dtype=float))
            flat = kernels.trig_increment(np.ascontiguousarray(x).ravel(), np.ascontiguousarray(h).ravel(),
                                          cph, sph, coef, integrated)
            return flat.reshape(x.shape)

        if integrated:
            f = lambda t: cb * raw_int(t)
            df = lambda t: cb * raw(t)
        else:
            # C^beta with beta <= 1: no meaningful derivative
            f = lambda t: cb * raw(t)
            df = None
        p = {"M": M, "beta": beta, "seed": int(params["seed"]), "J": J}
        return DrivingFunction(family, p, T, int(params["seed"]), (), beta, 1.0, f, df, inc)

    if family == "midpoint-random":
        _need(params, "sigma", "seed")
        sigma = float(params["sigma"])
        level = int(params.get("level", 11))
        if sigma < 0:
            raise ParameterError(f"sigma must be >= 0, got {sigma}")
        rng = np.random.default_rng(int(params["seed"]))
        N = 2 ** level
        v = np.zeros(N + 1)
        v[N] = math.sqrt(T) * rng.uniform(-1.0, 1.0)
        step = N
        j = 1
        while step > 1:
            half = step // 2
            mids = np.arange(half, N, step)
            u = rng.uniform(-1.0, 1.0, mids.shape[0])
            v[mids] = 0.5 * (v[mids - half] + v[mids + half]) + math.sqrt(T) * 2.0 ** (-j / 2) * u
            step = half
            j += 1
        tg = np.linspace(0.0, T, N + 1)
        semi = _all_pairs_seminorm(v, T / N, 0.5)
        vals = v * (sigma / semi) if semi > 0 else v * 0.0
        p = {"sigma": sigma, "seed": int(params["seed"]), "level": level}
        return DrivingFunction(family, p, T, int(params["seed"]), (), 0.5, 1.0,
                               lambda t: np.interp(t, tg, vals), None, None)

    if family == "tabulated":
        _need(params, "t", "lambda")
        tt = np.asarray(params["t"], dtype=float)
        ll = np.asarray(params["lambda"], dtype=float)
        if tt.ndim != 1 or tt.shape != ll.shape or tt.size < 2:
            raise ParameterError("tabulated needs matching 1-d t and lambda columns (>= 2 rows)")
        if tt[0] != 0.0:
            raise ParameterError(f"tabulated t must start at 0, got {tt[0]}")
        if np.any(np.diff(tt) <= 0):
            raise ParameterError("tabulated t must be strictly increasing")
        if not np.all(np.isfinite(ll)):
            raise ParameterError("tabulated lambda must be finite")
        p = {"t": tt.tolist(), "lambda": ll.tolist()}
        return DrivingFunction(family, p, float(tt[-1]), None, (), 1.0, 1.0,
                               lambda t: np.interp(t, tt, ll), None, None)

    raise ParameterError(f"unknown family {family!r}; expected one of {FAMILIES}")


def read_tabulated(path) -> DrivingFunction:
    """Load a ``t,lambda`` CSV (header row required) as a tabulated driver."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParameterError(f"{path}: empty file")
    head = [h.strip().lower() for h in rows[0]]
    if head[:2] != ["t", "lambda"]:
        raise ParameterError(f"{path}: expected header 't,lambda', got {rows[0]}")
    data = np.array([[float(x) for x in r[:2]] for r in rows[1:] if r], dtype=float)
    return make_family("tabulated", {"t": data[:, 0], "lambda": data[:, 1]})


def write_tabulated(lam: DrivingFunction, path, n: int = DEFAULT_GRID) -> None:
    """Sample ``lam`` on a uniform grid and write it as ``t,lambda`` CSV."""
    t = np.linspace(0.0, lam.T, n + 1)
    v = lam.eval(t)
    with open(path, "w", newline="") as fh:
        fh.write("t,lambda\n")
        for a, b in zip(t, v):
            fh.write(f"{a:.17g},{b:.17g}\n")


# ---------------------------------------------------------------------------
# norms

@dataclass(frozen=True)
class NormReport:
    """Sampled (lower-bound) value of a norm or seminorm."""
    value: float
    grid_size: int
    pair_scheme: str


def _lags(n_grid, pair_scheme):
    if pair_scheme == "all-pairs":
        return np.arange(1, n_grid + 1, dtype=np.int64)
    if pair_scheme == "dyadic-pairs":
        L = [n_grid >> j for j in range(0, int(math.log2(n_grid)) + 1)]
        return np.array(sorted({x for x in L if x >= 1}), dtype=np.int64)
    raise ValueError(f"unknown pair scheme {pair_scheme!r}")


def seminorm(values, h, alpha, pair_scheme="all-pairs") -> float:
    """Sampled Hölder seminorm of uniformly spaced ``values`` (spacing ``h``)."""
    v = np.ascontiguousarray(values, dtype=float)
    n = v.shape[0] - 1
    return float(kernels.holder_lags(v, float(h), float(alpha), _lags(n, pair_scheme)))


def lip_half_seminorm(lam: DrivingFunction, n_grid: int = DEFAULT_GRID,
                      pair_scheme: str = "all-pairs") -> NormReport:
    """Grid supremum of ``|lam(t1) - lam(t2)| / |t1 - t2|^(1/2)``.

    Uses the ``n_grid + 1`` uniform nodes of ``[0, T]``; the result is a lower
    bound for the true seminorm.
    """
    if n_grid < 2:
        raise ValueError("n_grid must be >= 2")
    t = np.linspace(0.0, lam.T, n_grid + 1)
    val = seminorm(lam.eval(t), lam.T / n_grid, 0.5, pair_scheme)
    return NormReport(val, n_grid, pair_scheme)


def holder_norm(lam: DrivingFunction, n: int, alpha: float,
                n_grid: int = DEFAULT_GRID, pair_scheme: str = "all-pairs") -> NormReport:
    """Sampled ``C^{n,alpha}`` norm, ``n`` in ``{0, 1}``.

    ``sum_k sup |lam^(k)| + [lam^(n)]_alpha``; the derivative falls back to
    :meth:`DrivingFunction.slope` when no closed form exists.
    """
    if n not in (0, 1):
        raise ValueError("n must be 0 or 1")
    t = np.linspace(0.0, lam.T, n_grid + 1)
    v = lam.eval(t)
    total = float(np.max(np.abs(v)))
    top = v
    if n == 1:
        top = np.asarray(lam.slope(t), dtype=float)
        total += float(np.max(np.abs(top)))
    total += seminorm(top, lam.T / n_grid, alpha, pair_scheme)
    return NormReport(total, n_grid, pair_scheme)


# ---------------------------------------------------------------------------
# transforms (functional spellings)

def rescale(lam: DrivingFunction) -> DrivingFunction:
    return lam.rescale()


def shift(lam: DrivingFunction, s: float) -> DrivingFunction:
    return lam.shift(s)


def omega(lam: DrivingFunction, s: float, u: float, eps: float,
          n_grid: int = DEFAULT_GRID, swap: bool = False) -> float:
    """Second difference ``sup_{0<=v<=u} |lam(s+eps-v) - lam(s+eps-u) - lam(s-v) + lam(s-u)|``.

    ``swap=True`` groups the four terms by the ``eps`` shift instead of by
    window; equal in exact arithmetic.
    """
    if s + eps > lam.T * (1 + 1e-12):
        raise DomainError(f"need s + eps <= T, got {s} + {eps} > {lam.T}")
    if not 0.0 < u <= s:
        raise DomainError(f"need 0 < u <= s, got u={u}, s={s}")
    v = np.linspace(0.0, u, n_grid + 1)
    if swap:
        d = (lam.eval(s + eps - v) - lam.eval(s - v)) - (lam.eval(s + eps - u) - lam.eval(s - u))
    else:
        d = (lam.eval(s + eps - v) - lam.eval(s + eps - u)) - (lam.eval(s - v) - lam.eval(s - u))
    return float(np.max(np.abs(d)))


def effective_delta(lam: DrivingFunction) -> float:
    """``delta`` in ``Lip(1/2 + delta)`` used to grade quadrature meshes, clipped to [1/4, 1/2]."""
    return float(np.clip(min(lam.regularity, 1.0) - 0.5, 0.25, 0.5))


def check_regime(lam: DrivingFunction, sigma_max: float = 1.0, n_grid: int = DEFAULT_GRID):
    """Warn if the sampled Lip(1/2) seminorm exceeds ``sigma_max``."""
    from .slit import GenerationWarning
    sig = lip_half_seminorm(lam, n_grid).value
    if sig > sigma_max * (1 + 1e-9):
        warnings.warn(f"sampled Lip(1/2) seminorm {sig:.4g} > {sigma_max}: outside the validated regime",
                      GenerationWarning, stacklevel=3)
    return sig
