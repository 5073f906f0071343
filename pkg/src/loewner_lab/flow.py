"""Elementary conformal maps for constant driving and their compositions.

Over a step of length ``d`` with constant driving value ``c`` the Loewner flow
is solved exactly by ``g(z) = c + sqrt_h((z - c)^2 + 4 d)``.  A
:class:`DiscretizedFlow` strings such steps together; ``g_s`` is the forward
composition and ``f_s = g_s^{-1}`` the inverse one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .driving import DrivingFunction

GRIDS = ("uniform", "graded", "tip", "auto")
SLIT_TOL = 1e-14


class SwallowedPointError(ValueError):
    """The point was absorbed by the hull before the requested time."""

    def __init__(self, z, t_star):
        self.z = z
        self.t_star = t_star
        super().__init__(f"point {z!r} swallowed at t={t_star:.6g}")


def sqrt_h(zeta, ref):
    """Square root of ``zeta`` in the closed upper half-plane.

    On the real axis the sign follows ``Re(ref)``.
    """
    r = np.sqrt(np.asarray(zeta, dtype=complex))
    ref = np.asarray(ref, dtype=complex)
    flip = (r.imag < 0) | ((r.imag == 0) & (r.real * ref.real < 0))
    out = np.where(flip, -r, r)
    return complex(out) if out.ndim == 0 else out


def _slit_distance(a, d):
    h = 2.0 * np.sqrt(d)
    y = a.imag
    return np.where((y >= 0) & (y <= h), np.abs(a.real),
                    np.where(y > h, np.abs(a - 1j * h), np.abs(a)))


def elementary_forward(z, lam0: float, delta: float):
    """Exact flow of one constant-driving step: ``lam0 + sqrt_h((z - lam0)^2 + 4 delta)``.

    Points on the removed slit (excluding its tip, which maps to ``lam0``)
    raise :class:`SwallowedPointError`.
    """
    z = np.asarray(z, dtype=complex)
    a = z - lam0
    if delta > 0:
        h = 2.0 * math.sqrt(delta)
        tol = SLIT_TOL * max(1.0, h)
        on = (np.abs(a.real) < tol) & (a.imag >= -tol) & (a.imag < h - tol)
        if np.any(on):
            raise SwallowedPointError(complex(np.ravel(z)[np.argmax(np.ravel(on))]), delta)
    out = lam0 + np.asarray(sqrt_h(a * a + 4.0 * delta, a))
    return complex(out) if out.ndim == 0 else out


def elementary_inverse(w, lam0: float, delta: float):
    """Inverse step ``lam0 + sqrt_h((w - lam0)^2 - 4 delta)``; ``lam0`` maps to the slit tip."""
    w = np.asarray(w, dtype=complex)
    a = w - lam0
    out = lam0 + np.asarray(sqrt_h(a * a - 4.0 * delta, a))
    return complex(out) if out.ndim == 0 else out


def _grid_fractions(n, grid, p):
    """Node fractions ``x_k = t_k / T`` and step fractions, accurate near both ends."""
    k = np.arange(n + 1, dtype=float)
    if grid == "uniform":
        x = k / n
        d = np.full(n, 1.0 / n)
        r = 1.0 - x
    elif grid == "graded":
        x = (k / n) ** 2
        d = (2.0 * k[:-1] + 1.0) / float(n) ** 2
        r = 1.0 - x
    elif grid == "tip":
        # graded towards T: reverse time r_k = (1 - k/n)^p
        r = ((n - k) / n) ** p
        d = r[:-1] - r[1:]
        x = 1.0 - r
    else:
        raise ValueError(f"unknown grid {grid!r}; expected one of {GRIDS}")
    return x, d, r


@dataclass(frozen=True, eq=False)
class DiscretizedFlow:
    """Piecewise-constant driving on a step grid.

    Attributes
    ----------
    times : ndarray, shape (n+1,)
    driving_values : ndarray, shape (n,)
        Driving at step midpoints.
    increments : ndarray, shape (n,)
        Step lengths (built from exact fractions, not by differencing ``times``).
    reverse : ndarray, shape (n+1,)
        ``T - times``, kept separately for accuracy near ``T``.
    grid : str
    """

    times: np.ndarray
    driving_values: np.ndarray
    increments: np.ndarray
    reverse: np.ndarray
    grid: str = "uniform"
    T: float = 1.0

    @property
    def n(self) -> int:
        return self.increments.shape[0]

    @classmethod
    def from_driving(cls, lam: DrivingFunction, n: int, grid: str = "auto",
                     T: Optional[float] = None, grading: Optional[float] = None) -> "DiscretizedFlow":
        """Sample ``lam`` at step midpoints of an ``n``-step grid on ``[0, T]``.

        ``grid='auto'`` uses ``tip`` grading when the family is singular at its
        right end (spiral with ``T = 1``), else uniform.  ``grading`` overrides
        the exponent of the ``tip`` grid, ``r_k = T (1 - k/n)^p``.
        """
        if n < 1:
            raise ValueError("n must be >= 1")
        T = lam.T if T is None else float(T)
        p = lam.tip_grading if T == lam.T else 1.0
        if grading is not None:
            p = float(grading)
        if grid == "auto":
            grid = "tip" if p > 1.0 else "uniform"
        x, dfrac, rfrac = _grid_fractions(n, grid, max(p, 1.0))
        d = T * dfrac
        r = T * rfrac
        rmid = r[1:] + 0.5 * d
        lam0 = lam.eval(0.0)
        c = lam0 + lam.increment(T, rmid, T, T - rmid)
        times = T * x
        times[-1] = T
        return cls(times, np.ascontiguousarray(c, dtype=float), d, r, grid, T)

    @classmethod
    def from_arrays(cls, times, driving_values) -> "DiscretizedFlow":
        t = np.asarray(times, dtype=float)
        c = np.asarray(driving_values, dtype=float)
        if t.ndim != 1 or c.shape != (t.shape[0] - 1,):
            raise ValueError("need len(driving_values) == len(times) - 1")
        d = np.diff(t)
        if t[0] != 0.0 or np.any(d <= 0):
            raise ValueError("times must start at 0 and increase strictly")
        return cls(t, c, d, t[-1] - t, "custom", float(t[-1]))

    def node_index(self, s: float) -> int:
        """Index of the grid node nearest to ``s``."""
        return int(np.argmin(np.abs(self.times - s)))

    def driving_table(self, lam: DrivingFunction, substeps: int) -> np.ndarray:
        """Driving at ``t_{j+1} - m d_j / (2 S)`` for ``m = 0..2S`` (reverse-ODE input)."""
        m = np.arange(2 * substeps + 1, dtype=float)
        back = self.reverse[1:, None] + m[None, :] * self.increments[:, None] / (2 * substeps)
        return lam.eval(0.0) + lam.increment(self.T, back, self.T, self.T - back)

    def to_dict(self) -> dict:
        return {"times": self.times.tolist(), "driving_values": self.driving_values.tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "DiscretizedFlow":
        d = json.loads(s)
        return cls.from_arrays(d["times"], d["driving_values"])


def _swallow_tol(flow):
    return 1e-9 * math.sqrt(flow.T)


def _run_forward(flow: DiscretizedFlow, z, s, tol=None):
    k = flow.node_index(s)
    zz = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    tol = _swallow_tol(flow) if tol is None else tol
    res = kernels.forward_points(np.ascontiguousarray(zz), flow.driving_values[:k],
                                 flow.increments[:k], float(tol))
    return res, np.shape(z)


def _hit_time(flow, step, frac):
    return float(flow.times[step] + frac * flow.increments[step])


TIP_FRAC = 1.0 - 1e-6


def _finish(flow, z, res, idx, shape, k=None):
    g = res[idx].copy()
    hs, hf = res[5], res[6]
    if idx == 0 and k:
        # the newest slit tip is on the boundary at time s and maps to the driving value
        at_tip = (hs == k - 1) & (hf >= TIP_FRAC)
        g[at_tip] = flow.driving_values[k - 1]
        hs = np.where(at_tip, -1, hs)
    bad = np.flatnonzero(hs >= 0)
    if bad.size:
        i = bad[0]
        raise SwallowedPointError(complex(np.ravel(z)[i]), _hit_time(flow, hs[i], hf[i]))
    g = g.reshape(shape)
    return complex(g) if g.ndim == 0 else g


def forward_map(flow: DiscretizedFlow, z, s: float):
    """``g_s(z)``, ``s`` snapped to the nearest grid node.

    The tip of the slit grown by time ``s`` maps to the driving value.
    """
    res, shape = _run_forward(flow, z, s)
    return _finish(flow, z, res, 0, shape, flow.node_index(s))


def forward_derivative(flow: DiscretizedFlow, z, s: float):
    """``g_s'(z)`` as the chain-rule product of elementary derivatives."""
    res, shape = _run_forward(flow, z, s)
    return _finish(flow, z, res, 1, shape)


def log_derivative_integral(flow: DiscretizedFlow, z, s: float):
    """``-int_0^s 2 / (g_u(z) - lam(u))^2 du`` by the midpoint rule on each step.

    The midpoint value of ``g`` is taken from the exact flow of the step.
    """
    res, shape = _run_forward(flow, z, s)
    return _finish(flow, z, res, 3, shape)


def second_derivative(flow: DiscretizedFlow, z, s: float):
    """``g_s''(z)`` from the composition rule ``(G o H)'' = G''(H) H'^2 + G'(H) H''``."""
    res, shape = _run_forward(flow, z, s)
    return _finish(flow, z, res, 2, shape)


def second_derivative_quadrature(flow: DiscretizedFlow, z, s: float):
    """``4 g_s'(z) int_0^s g_u'(z) / (g_u(z) - lam(u))^3 du`` (midpoint rule per step).

    Independent route to :func:`second_derivative`, used as a cross-check.
    """
    res, shape = _run_forward(flow, z, s)
    g1 = _finish(flow, z, res, 1, shape)
    g3 = _finish(flow, z, res, 4, shape)
    return 4.0 * g1 * g3


def swallow_time(flow: DiscretizedFlow, z, tol: Optional[float] = None):
    """Time at which ``z`` meets the hull, or ``None`` if it survives to ``T``.

    A point is swallowed during the first step whose elementary slit passes
    within ``tol`` (default ``1e-9 sqrt(T)``) of its current image; the
    reported time interpolates within that step.
    """
    res, _ = _run_forward(flow, z, flow.T, tol)
    hs, hf = res[5], res[6]
    out = [None if h < 0 else _hit_time(flow, h, f) for h, f in zip(hs, hf)]
    return out[0] if np.ndim(z) == 0 else out


def inverse_map(flow: DiscretizedFlow, w, s: float, with_derivative: bool = False):
    """``f_s(w)`` (and optionally ``f_s'(w)``), ``s`` snapped to the grid."""
    k = flow.node_index(s)
    ww = np.ascontiguousarray(np.atleast_1d(np.asarray(w, dtype=complex)).ravel())
    f, f1 = kernels.inverse_points(ww, flow.driving_values[:k], flow.increments[:k])
    f = f.reshape(np.shape(w))
    f1 = f1.reshape(np.shape(w))
    if np.ndim(w) == 0:
        f, f1 = complex(f), complex(f1)
    return (f, f1) if with_derivative else f
