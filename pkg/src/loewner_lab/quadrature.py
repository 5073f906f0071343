"""Composite Gauss-Legendre rules on graded meshes.

For integrands behaving like ``u^(delta - 1)`` at ``u = 0`` the substitution
``u = s x^q`` with ``q = 1 / delta`` makes the pulled-back integrand bounded,
and a composite Gauss-Legendre rule in ``x`` then converges at its normal
rate.
"""

from functools import lru_cache

import numpy as np

PANEL_ORDER = 8


@lru_cache(maxsize=32)
def _unit_rule(n_nodes: int, order: int):
    order = min(order, n_nodes)
    panels = max(1, n_nodes // order)
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    h = np.diff(edges)
    x = (edges[:-1, None] + 0.5 * h[:, None] * (xg[None, :] + 1.0)).ravel()
    w = (0.5 * h[:, None] * wg[None, :]).ravel()
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def graded_rule(s: float, n_nodes: int, q: float, order: int = PANEL_ORDER):
    """Nodes and weights for ``int_0^s f(u) du`` with ``u = s x^q``.

    ``n_nodes`` is rounded down to a multiple of ``order``.
    """
    x, w = _unit_rule(int(n_nodes), int(order))
    u = s * x ** q
    wt = w * q * s * x ** (q - 1.0)
    return u, wt


def pairwise_sum(v):
    """Deterministic pairwise summation along the last axis."""
    v = np.asarray(v)
    while v.shape[-1] > 1:
        if v.shape[-1] % 2:
            v = np.concatenate([v, np.zeros(v.shape[:-1] + (1,), dtype=v.dtype)], axis=-1)
        v = v[..., ::2] + v[..., 1::2]
    return v[..., 0]
