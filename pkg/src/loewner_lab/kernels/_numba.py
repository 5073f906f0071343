"""Numba twins of the numpy kernels.

Loops run point-by-point instead of step-by-step, which keeps everything in
registers.  The arithmetic recipe matches ``_numpy.py`` line for line.
"""

import math

import numpy as np
from numba import njit

_opts = dict(nogil=True, cache=True)


@njit(**_opts)
def _upper(r, ref):
    if r.imag < 0.0 or (r.imag == 0.0 and r.real * ref.real < 0.0):
        return -r
    return r


@njit(**_opts)
def compose_tips(c, d):
    n = c.shape[0]
    out = np.empty(n, dtype=np.complex128)
    for k in range(n):
        w = complex(c[k], 0.0)
        for j in range(k, -1, -1):
            a = w - c[j]
            w = c[j] + _upper(np.sqrt(a * a - 4.0 * d[j]), a)
        out[k] = w
    return out


@njit(**_opts)
def window_tips(c, u, H):
    m, n = c.shape
    out = np.empty(m, dtype=np.complex128)
    for i in range(m):
        e = complex(c[i, 0], 0.0)
        ui = u[i]
        for k in range(1, n):
            ck = c[i, k]
            z0 = 2j * math.sqrt(ui * H[k])
            z1 = 2j * math.sqrt(ui * H[k + 1])
            ec = e - ck
            D = 2.0 * z0 * ec + ec * ec
            S = _upper(np.sqrt(z1 * z1 + D), z0 + ec)
            e = ck + D / (S + z1)
        out[i] = e
    return out


@njit(**_opts)
def forward_points(z, c, d, tol):
    m = z.shape[0]
    n = c.shape[0]
    G = np.empty(m, dtype=np.complex128)
    G1 = np.empty(m, dtype=np.complex128)
    G2 = np.empty(m, dtype=np.complex128)
    LI = np.empty(m, dtype=np.complex128)
    G3 = np.empty(m, dtype=np.complex128)
    hs = np.full(m, -1, dtype=np.int64)
    hf = np.zeros(m)
    nan = complex(np.nan, np.nan)
    for i in range(m):
        g = complex(z[i])
        g1 = 1.0 + 0j
        g2 = 0j
        li = 0j
        g3 = 0j
        alive = True
        for k in range(n):
            ck = c[k]
            dk = d[k]
            a = g - ck
            if alive:
                h = 2.0 * math.sqrt(dk)
                y = a.imag
                if y >= 0.0 and y <= h:
                    dist = abs(a.real)
                elif y > h:
                    dist = abs(a - 1j * h)
                else:
                    dist = abs(a)
                if dist < tol:
                    hs[i] = k
                    fr = -(a * a).real / (4.0 * dk)
                    hf[i] = min(max(fr, 0.0), 1.0)
                    alive = False
                    g = nan
                    a = nan
            a2 = a * a
            half = _upper(np.sqrt(a2 + 2.0 * dk), a)
            g1mid = g1 * a / half
            li -= 2.0 * dk / (half * half)
            g3 += dk * g1mid / (half * half * half)
            S = _upper(np.sqrt(a2 + 4.0 * dk), a)
            p1 = a / S
            p2 = 4.0 * dk / (S * S * S)
            g2 = p2 * g1 * g1 + p1 * g2
            g1 = p1 * g1
            if alive:
                g = ck + S
        G[i] = g
        G1[i] = g1
        G2[i] = g2
        LI[i] = li
        G3[i] = g3
    return G, G1, G2, LI, G3, hs, hf


@njit(**_opts)
def inverse_points(w, c, d):
    m = w.shape[0]
    F = np.empty(m, dtype=np.complex128)
    F1 = np.empty(m, dtype=np.complex128)
    for i in range(m):
        f = complex(w[i])
        f1 = 1.0 + 0j
        for j in range(c.shape[0] - 1, -1, -1):
            a = f - c[j]
            S = _upper(np.sqrt(a * a - 4.0 * d[j]), a)
            f1 = f1 * a / S
            f = c[j] + S
        F[i] = f
        F1[i] = f1
    return F, F1


@njit(**_opts)
def reverse_ode_tips(table, d, substeps):
    n = d.shape[0]
    S = substeps
    out = np.empty(n, dtype=np.complex128)
    for i in range(n):
        h = table[i, 0] + 2j * math.sqrt(d[i] / S)
        for q in range(1, (i + 1) * S):
            j = i - q // S
            sub = q % S
            dt = d[j] / S
            x0 = table[j, 2 * sub]
            xm = table[j, 2 * sub + 1]
            x1 = table[j, 2 * sub + 2]
            k1 = -2.0 / (h - x0)
            k2 = -2.0 / (h + 0.5 * dt * k1 - xm)
            k3 = -2.0 / (h + 0.5 * dt * k2 - xm)
            k4 = -2.0 / (h + dt * k3 - x1)
            h = h + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
        out[i] = h
    return out


@njit(**_opts)
def holder_lags(v, h, alpha, lags):
    n = v.shape[0]
    best = 0.0
    for L in lags:
        if L <= 0 or L >= n:
            continue
        m = 0.0
        for i in range(n - L):
            x = abs(v[i + L] - v[i])
            if x > m:
                m = x
        r = m / (L * h) ** alpha
        if r > best:
            best = r
    return best


@njit(**_opts)
def lag_modulus(v, lags):
    n = v.shape[0]
    out = np.zeros(lags.shape[0])
    for t in range(lags.shape[0]):
        L = lags[t]
        m = 0.0
        for i in range(n - L):
            x = abs(v[i + L] - v[i])
            if x > m:
                m = x
        out[t] = m
    return out



@njit(**_opts)
def trig_increment(x, h, cphase, sphase, coef, integrated):
    m = x.shape[0]
    out = np.empty(m)
    for i in range(m):
        sx = math.sin(x[i])
        cx = math.cos(x[i])
        sb = math.sin(0.5 * h[i])
        cb = math.cos(0.5 * h[i])
        acc = 0.0
        for j in range(coef.shape[0]):
            sA = sx * cphase[j] + cx * sphase[j]
            cA = cx * cphase[j] - sx * sphase[j]
            if integrated:
                acc += 2.0 * coef[j] * sb * (cA * cb - sA * sb)
            else:
                acc -= 2.0 * coef[j] * sb * (sA * cb + cA * sb)
            sx, cx = 2.0 * sx * cx, (cx - sx) * (cx + sx)
            sb, cb = 2.0 * sb * cb, 1.0 - 2.0 * sb * sb
        out[i] = acc
    return out
