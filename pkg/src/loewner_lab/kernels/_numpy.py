"""Pure-numpy implementations of the hot loops.

Every function here has a twin in ``_numba.py`` with the same signature and
the same floating-point recipe, so results agree to rounding.  The numpy
versions vectorize across independent chains (tips, windows, points) and loop
over elementary steps.
"""

import numpy as np


def _upper(r, ref):
    """Select the square-root branch lying in the closed upper half-plane.

    ``r`` is a principal square root.  Negative imaginary parts are flipped;
    on the real axis the sign follows ``ref.real`` so that the map is
    continuous on the boundary.
    """
    flip = (r.imag < 0) | ((r.imag == 0) & (r.real * ref.real < 0))
    return np.where(flip, -r, r)


def compose_tips(c, d):
    """Tips of the discrete slit at every grid node.

    ``c[j]`` is the driving value on step ``j`` and ``d[j]`` its capacity
    increment.  Entry ``k - 1`` of the result is the tip at node ``k``: start at
    ``c[k-1]`` (the preimage of the newest elementary slit) and apply the
    inverse elementary maps for steps ``k-1, ..., 0``.
    """
    n = c.shape[0]
    w = c.astype(np.complex128)
    for j in range(n - 1, -1, -1):
        a = w[j:] - c[j]
        w[j:] = c[j] + _upper(np.sqrt(a * a - 4.0 * d[j]), a)
    return w


def window_tips(c, u, H):
    """Deviation-form chains for a batch of sub-slit windows.

    Window ``i`` spans capacity ``u[i]``; its reverse-time node ``k`` sits at
    ``u[i] * H[k]`` measured back from the tip and ``c[i, k]`` is the driving
    offset (relative to the window base) on step ``k``.  Returns ``e`` with
    ``gamma = 2i sqrt(u) + e``, computed without cancellation against the
    vertical slit so that small deviations keep full relative accuracy.
    """
    m, n = c.shape
    e = c[:, 0].astype(np.complex128)
    for k in range(1, n):
        ck = c[:, k]
        z0 = 2j * np.sqrt(u * H[k])
        z1 = 2j * np.sqrt(u * H[k + 1])
        ec = e - ck
        D = 2.0 * z0 * ec + ec * ec
        S = _upper(np.sqrt(z1 * z1 + D), z0 + ec)
        e = ck + D / (S + z1)
    return e


def forward_points(z, c, d, tol):
    """Push points forward through the elementary maps of steps ``0..n-1``.

    Returns ``(g, g1, g2, logint, g3int, hit_step, hit_frac)``: the image,
    its first and second derivatives by the composition recurrence, the
    midpoint-rule value of ``-int 2/(g - lam)^2`` and of
    ``int g'/(g - lam)^3``, and for swallowed points the step index and
    fraction of that step at which the point met the slit (``-1`` otherwise).
    """
    g = np.array(z, dtype=np.complex128).copy()
    m = g.shape[0]
    g1 = np.ones(m, dtype=np.complex128)
    g2 = np.zeros(m, dtype=np.complex128)
    logint = np.zeros(m, dtype=np.complex128)
    g3int = np.zeros(m, dtype=np.complex128)
    hit_step = np.full(m, -1, dtype=np.int64)
    hit_frac = np.zeros(m)
    alive = np.ones(m, dtype=bool)
    with np.errstate(invalid="ignore", divide="ignore"):
        for k in range(c.shape[0]):
            _forward_step(k, c[k], d[k], g, g1, g2, logint, g3int, hit_step, hit_frac, alive, tol)
    return g, g1, g2, logint, g3int, hit_step, hit_frac


def _forward_step(k, ck, dk, g, g1, g2, logint, g3int, hit_step, hit_frac, alive, tol):
    a = g - ck
    h = 2.0 * np.sqrt(dk)
    y = a.imag
    dist = np.where(
        (y >= 0) & (y <= h), np.abs(a.real),
        np.where(y > h, np.abs(a - 1j * h), np.abs(a)))
    newly = alive & (dist < tol)
    if newly.any():
        hit_step[newly] = k
        hit_frac[newly] = np.clip(-(a[newly] * a[newly]).real / (4.0 * dk), 0.0, 1.0)
        alive &= ~newly
        g[newly] = np.nan
    a2 = a * a
    half = _upper(np.sqrt(a2 + 2.0 * dk), a)
    g1mid = g1 * a / half
    logint -= 2.0 * dk / (half * half)
    g3int += dk * g1mid / (half * half * half)
    S = _upper(np.sqrt(a2 + 4.0 * dk), a)
    p1 = a / S
    p2 = 4.0 * dk / (S * S * S)
    g2[:] = p2 * g1 * g1 + p1 * g2
    g1 *= p1
    g[:] = np.where(alive, ck + S, g)


def inverse_points(w, c, d):
    """Apply the inverse elementary maps for steps ``n-1, ..., 0``.

    Returns the image and its derivative (product of the elementary
    derivatives along the chain).
    """
    f = np.array(w, dtype=np.complex128).copy()
    f1 = np.ones(f.shape[0], dtype=np.complex128)
    for j in range(c.shape[0] - 1, -1, -1):
        a = f - c[j]
        S = _upper(np.sqrt(a * a - 4.0 * d[j]), a)
        f1 = f1 * a / S
        f = c[j] + S
    return f, f1


def reverse_ode_tips(table, d, substeps):
    """Tips via RK4 on the backward Loewner flow ``h' = -2 / (h - xi)``.

    ``table[j, m]`` holds the driving value at ``t_{j+1} - m * d[j] / (2 S)``
    for ``m = 0..2S``.  For the tip at node ``k`` the first substep is the exact
    vertical slit of height ``2 sqrt(d / S)``; RK4 covers the rest.
    """
    n = d.shape[0]
    S = substeps
    h = table[:, 0] + 2j * np.sqrt(d / S)
    # global substep counter q runs over (step offset, substep) pairs
    total = n * S
    idx = np.arange(n)
    for q in range(1, total):
        off, sub = divmod(q, S)
        j = idx - off
        act = j >= 0
        if not act.any():
            break
        ja = j[act]
        dt = d[ja] / S
        x0 = table[ja, 2 * sub]
        xm = table[ja, 2 * sub + 1]
        x1 = table[ja, 2 * sub + 2]
        ha = h[act]
        k1 = -2.0 / (ha - x0)
        k2 = -2.0 / (ha + 0.5 * dt * k1 - xm)
        k3 = -2.0 / (ha + 0.5 * dt * k2 - xm)
        k4 = -2.0 / (ha + dt * k3 - x1)
        h[act] = ha + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
    return h


def holder_lags(v, h, alpha, lags):
    """``max |v[i+L] - v[i]| / (L h)^alpha`` over the given integer lags."""
    best = 0.0
    for L in lags:
        L = int(L)
        if L <= 0 or L >= v.shape[0]:
            continue
        m = np.max(np.abs(v[L:] - v[:-L]))
        r = m / (L * h) ** alpha
        if r > best:
            best = r
    return best


def lag_modulus(v, lags):
    """Modulus of continuity ``max_i |v[i+L] - v[i]|`` for each lag."""
    out = np.zeros(len(lags))
    for i, L in enumerate(lags):
        L = int(L)
        out[i] = np.max(np.abs(v[L:] - v[:-L]))
    return out



def trig_increment(x, h, cphase, sphase, coef, integrated):
    """``W(x + h) - W(x)`` for the lacunary sum ``W = sum_j coef_j cos(2^j t + phase_j)``
    (``sin`` when ``integrated``).

    Uses ``cos(A + B) - cos A = -2 sin(B/2) sin(A + B/2)`` so small ``h`` keeps
    relative accuracy, and generates the angles ``2^j x`` and ``2^j h / 2`` by
    the doubling formulas: four transcendental calls per point instead of two
    per term.
    """
    sx, cx = np.sin(x), np.cos(x)
    sb, cb = np.sin(0.5 * h), np.cos(0.5 * h)
    out = np.zeros(np.shape(x))
    for j in range(coef.shape[0]):
        sA = sx * cphase[j] + cx * sphase[j]
        cA = cx * cphase[j] - sx * sphase[j]
        if integrated:
            out += 2.0 * coef[j] * sb * (cA * cb - sA * sb)
        else:
            out -= 2.0 * coef[j] * sb * (sA * cb + cA * sb)
        sx, cx = 2.0 * sx * cx, (cx - sx) * (cx + sx)
        sb, cb = 2.0 * sb * cb, 1.0 - 2.0 * sb * sb
    return out
