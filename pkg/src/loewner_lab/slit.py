"""Tracing the slit and its sub-slit tips.

Two routes compute ``gamma(t_k)``:

* ``composition``: start at the preimage of the newest elementary slit and
  apply the inverse elementary maps back to time 0 (exact for piecewise
  constant driving);
* ``reverse-ode``: RK4 on the backward Loewner equation, kept as an
  independent check on the branch bookkeeping of the first route.

Sub-slit tips ``gamma(s, t) = g_s(gamma(t)) - lam(s)`` are computed by
deviation-form chains over the window ``[s, t]`` only (see :func:`window_deviation`).
"""

from __future__ import annotations

import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .driving import DrivingFunction, lip_half_seminorm
from .flow import DiscretizedFlow
from .report import VerificationReport

METHODS = ("composition", "reverse-ode")
RK4_SUBSTEPS = 4
SELF_INTERSECTION_MAX = 2 ** 14
DEFAULT_CHAIN = 512


class GenerationWarning(UserWarning):
    """Driver lies outside the regime where slit generation is validated."""


class TraceError(RuntimeError):
    """A traced point left the closed upper half-plane."""


@dataclass(frozen=True, eq=False)
class TracedSlit:
    """Sampled slit ``{(t_k, gamma(t_k))}``."""

    times: np.ndarray
    points: np.ndarray
    method: str
    driving_ref: dict = field(default_factory=dict)

    @property
    def tip(self) -> complex:
        return complex(self.points[-1])

    def to_csv(self, path=None) -> Optional[str]:
        """Write ``t,re,im`` rows at 17 significant digits with LF endings."""
        buf = io.StringIO()
        buf.write("t,re,im\n")
        for t, z in zip(self.times, self.points):
            buf.write(f"{t:.17g},{z.real:.17g},{z.imag:.17g}\n")
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="\n") as fh:
            fh.write(text)
        return None

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(),
                "points": [[z.real, z.imag] for z in self.points],
                "method": self.method, "driving_ref": self.driving_ref}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d) -> "TracedSlit":
        pts = np.array([complex(a, b) for a, b in d["points"]])
        return cls(np.asarray(d["times"], dtype=float), pts, d["method"], d.get("driving_ref", {}))


def trace(lam: DrivingFunction, n: int, method: str = "composition", grid: str = "auto",
          T: Optional[float] = None, check_regime: bool = True) -> TracedSlit:
    """Trace ``gamma`` on an ``n``-step grid of ``[0, T]``.

    Parameters
    ----------
    lam : DrivingFunction
    n : int
        Number of steps (``n + 1`` output points), at least 2.
    method : {'composition', 'reverse-ode'}
    grid : str
        Grid passed to :meth:`DiscretizedFlow.from_driving`.
    check_regime : bool
        Warn (:class:`GenerationWarning`) if the sampled Lip(1/2) seminorm
        exceeds 1.

    Raises
    ------
    TraceError
        If a point lands below the real axis by more than ``1e-9``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if check_regime:
        sig = lip_half_seminorm(lam, min(n, 4096)).value
        if sig > 1.0 + 1e-9:
            warnings.warn(f"sampled Lip(1/2) seminorm {sig:.4g} exceeds 1; trace is outside "
                          "the validated regime", GenerationWarning, stacklevel=2)
    flow = DiscretizedFlow.from_driving(lam, n, grid, T)
    if method == "composition":
        tips = kernels.compose_tips(flow.driving_values, flow.increments)
    else:
        table = np.ascontiguousarray(flow.driving_table(lam, RK4_SUBSTEPS))
        tips = kernels.reverse_ode_tips(table, flow.increments, RK4_SUBSTEPS)
    pts = np.concatenate([[complex(lam.eval(0.0))], tips])
    low = float(np.min(pts.imag))
    if low < -1e-9:
        raise TraceError(f"traced point left the half-plane (Im = {low:.3g})")
    return TracedSlit(flow.times.copy(), pts, method, lam.to_dict())


def tip_point(lam: DrivingFunction, n: int, T: Optional[float] = None, grid: str = "auto") -> complex:
    """``gamma(T)`` alone, in ``O(n)`` work."""
    flow = DiscretizedFlow.from_driving(lam, n, grid, T)
    c, d = flow.driving_values, flow.increments
    f, _ = kernels.inverse_points(np.array([complex(c[-1])]), c, d)
    return complex(f[0])


# ---------------------------------------------------------------------------
# window chains

def chain_grid(n: int, p: float = 2.0):
    """Reverse-time fractions ``H`` (0 at the tip, 1 at the base) and ``1 - H``.

    ``H = sin(pi x / 2)^p``: steps shrink like ``x^(p-1)`` at the tip, where the
    sub-slit geometry is finest, and quadratically at the base.
    """
    x = np.linspace(0.0, 1.0, n + 1)
    if p == 2.0:
        H = np.sin(0.5 * np.pi * x) ** 2
        G = np.cos(0.5 * np.pi * x) ** 2
    else:
        H = np.sin(0.5 * np.pi * x) ** p
        G = -np.expm1(p * np.log1p(-2.0 * np.sin(0.25 * np.pi * (1.0 - x)) ** 2))
    H[0], G[0] = 0.0, 1.0
    H[-1], G[-1] = 1.0, 0.0
    return H, G


def _chain_once(lam, end, span, n, p):
    H, G = chain_grid(n, p)
    hmid = 0.5 * (H[1:] + H[:-1])
    gmid = 0.5 * (G[1:] + G[:-1])
    back = span[:, None] * hmid[None, :]
    ahead = span[:, None] * gmid[None, :]
    c = lam.increment(end[:, None], back, span[:, None], ahead)
    c = np.ascontiguousarray(np.broadcast_to(c, back.shape), dtype=float)
    return kernels.window_tips(c, np.ascontiguousarray(span), H)


def window_deviation(lam: DrivingFunction, end, span, n: int = DEFAULT_CHAIN,
                     richardson: bool = True):
    """Deviation ``e = gamma(end - span, end) - 2i sqrt(span)`` for each window.

    Each window gets its own ``n``-step chain graded towards the tip; with
    ``richardson`` the results at ``n`` and ``2n`` steps are combined as
    ``(4 e_2n - e_n) / 3``.
    """
    end = np.atleast_1d(np.asarray(end, dtype=float))
    span = np.atleast_1d(np.asarray(span, dtype=float))
    end, span = np.broadcast_arrays(end, span)
    shape = end.shape
    end, span = end.ravel().copy(), span.ravel().copy()
    p = max(2.0, lam.tip_grading)
    e = _chain_once(lam, end, span, n, p)
    if richardson:
        e = (4.0 * _chain_once(lam, end, span, 2 * n, p) - e) / 3.0
    return e.reshape(shape)


@dataclass(frozen=True)
class SubSlitTip:
    """``gamma(s, t) = g_s(gamma(t)) - lam(s)`` and ``tau = gamma(s, t) / sqrt(t - s)``."""
    s: float
    t: float
    gamma_st: complex
    tau_st: complex


def sub_slit_tip(lam: DrivingFunction, s: float, t: float, n: int = DEFAULT_CHAIN,
                 richardson: bool = True) -> SubSlitTip:
    """Mapped-forward tip over the window ``[s, t]``."""
    if not 0.0 <= s < t <= lam.T * (1 + 1e-14):
        raise ValueError(f"need 0 <= s < t <= T, got s={s}, t={t}")
    u = t - s
    e = complex(window_deviation(lam, t, u, n, richardson)[0])
    g = 2j * math.sqrt(u) + e
    return SubSlitTip(s, t, g, 2j + e / math.sqrt(u))


def tip_identity(lam: DrivingFunction, t: float, n_quad: int = 2048, n_chain: int = 256):
    """Both sides of ``lam(t) - gamma(t) = int_0^t 2 / gamma(t - u, t) du``.

    The left side uses the full window ``[0, t]``; the integral uses a graded
    Gauss-Legendre rule in ``u = t x^2``.  Returns ``(lhs, rhs)``.
    """
    from .quadrature import graded_rule
    u, w = graded_rule(t, n_quad, 2.0)
    e = window_deviation(lam, np.full(u.shape, t), u, n_chain)
    rhs = np.sum(w * 2.0 / (2j * np.sqrt(u) + e))
    e_full = complex(window_deviation(lam, t, t, n_chain)[0])
    lhs = lam.eval(t) - lam.eval(0.0) - (2j * math.sqrt(t) + e_full)
    return complex(lhs), complex(rhs)


# ---------------------------------------------------------------------------
# checks

def cone_check(slit: TracedSlit, sigma: float, tol: Optional[float] = None) -> VerificationReport:
    """Check ``gamma(t) / sqrt(t)`` against the box ``|Re| <= sigma``, ``Im in [sqrt(4 - sigma^2), 2]``.

    ``tol`` defaults to ``5 / sqrt(n)``.  Assumes ``lam(0) = 0``.
    """
    n = slit.times.shape[0] - 1
    tol = 5.0 / math.sqrt(n) if tol is None else tol
    t = slit.times[1:]
    z = (slit.points[1:] - slit.points[0]) / np.sqrt(t)
    lo = math.sqrt(max(4.0 - sigma * sigma, 0.0))
    m_re = sigma + tol - np.abs(z.real)
    m_lo = z.imag - (lo - tol)
    m_hi = 2.0 + tol - z.imag
    m = np.minimum(np.minimum(m_re, m_lo), m_hi)
    margin = float(np.min(m))
    return VerificationReport("cone", margin >= 0, margin, int(t.size), -1,
                              {"sigma": sigma, "tol": tol, "n_fail": int(np.sum(m < 0)),
                               "max_abs_re": float(np.max(np.abs(z.real))),
                               "min_im": float(np.min(z.imag)), "max_im": float(np.max(z.imag))})


def _seg_dist(p1, p2, q1, q2):
    """Distance between segments ``[p1, p2]`` and ``[q1, q2]`` (complex endpoints)."""
    def pt_seg(p, a, b):
        ab = b - a
        L = (ab * np.conj(ab)).real
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(L > 0, ((p - a) * np.conj(ab)).real / L, 0.0)
        s = np.clip(s, 0.0, 1.0)
        return np.abs(p - (a + s * ab))

    def cross(a, b):
        return (np.conj(a) * b).imag

    r, s_ = p2 - p1, q2 - q1
    den = cross(r, s_)
    with np.errstate(invalid="ignore", divide="ignore"):
        tt = cross(q1 - p1, s_) / den
        uu = cross(q1 - p1, r) / den
    hit = (den != 0) & (tt >= 0) & (tt <= 1) & (uu >= 0) & (uu <= 1)
    d = np.minimum(np.minimum(pt_seg(p1, q1, q2), pt_seg(p2, q1, q2)),
                   np.minimum(pt_seg(q1, p1, p2), pt_seg(q2, p1, p2)))
    return np.where(hit, 0.0, d)


def min_segment_separation(slit: TracedSlit) -> Optional[float]:
    """Smallest distance between non-adjacent segments of the polyline.

    Candidate pairs come from a spatial hash with cell size equal to the
    longest segment; pairs in no common cell are at least that far apart, so
    the result is ``min(candidate distances, cell size)``.  Returns ``None``
    (skipped) beyond ``2^14`` points.
    """
    P = slit.points
    m = P.shape[0] - 1
    if m + 1 > SELF_INTERSECTION_MAX:
        return None
    if m < 3:
        return math.inf
    seg_len = np.abs(np.diff(P))
    cell = float(np.max(seg_len))
    if cell == 0:
        return 0.0
    a, b = P[:-1], P[1:]
    x0 = np.floor(np.minimum(a.real, b.real) / cell).astype(np.int64)
    x1 = np.floor(np.maximum(a.real, b.real) / cell).astype(np.int64)
    y0 = np.floor(np.minimum(a.imag, b.imag) / cell).astype(np.int64)
    y1 = np.floor(np.maximum(a.imag, b.imag) / cell).astype(np.int64)
    buckets: dict = {}
    for i in range(m):
        for cx in range(x0[i], x1[i] + 1):
            for cy in range(y0[i], y1[i] + 1):
                buckets.setdefault((cx, cy), []).append(i)
    I, J = [], []
    for key, segs in buckets.items():
        nb = []
        cx, cy = key
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                nb.extend(buckets.get((cx + dx, cy + dy), ()))
        nb = np.unique(np.asarray(nb))
        for i in segs:
            js = nb[nb > i + 1]
            I.extend([i] * js.size)
            J.extend(js.tolist())
    if not I:
        return cell
    I, J = np.asarray(I), np.asarray(J)
    d = _seg_dist(a[I], b[I], a[J], b[J])
    return float(min(np.min(d), cell))
