"""Real, orthonormal spherical harmonics on the unit sphere S^2.

Ordering: degree l ascending, and within a degree the order m runs from -l to l,
so (l, m) sits at row ``l*l + l + m``.  Convention (no Condon-Shortley phase)::

    Y_l0  = P_l^0(cos t)
    Y_lm  = sqrt(2) P_l^m(cos t) cos(m p)     m > 0
    Y_l-m = sqrt(2) P_l^m(cos t) sin(m p)     m > 0

with P_l^m fully normalized so that every Y has unit L^2 norm on S^2.
Gradients are returned in the orthonormal frame (e_theta, e_phi).
"""

import math

import numpy as np


def degree_count(lmax):
    return (lmax + 1) ** 2


def index(l, m):
    return l * l + l + m


def max_degree(L):
    """Largest l with l(l+1) <= L, or -1 when L < 0."""
    if L < 0:
        return -1
    l = int(math.floor((math.sqrt(1.0 + 4.0 * L) - 1.0) / 2.0))
    while (l + 1) * (l + 2) <= L:
        l += 1
    while l >= 0 and l * (l + 1) > L:
        l -= 1
    return l


def _polar(points):
    points = np.asarray(points, dtype=float)
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    s = np.hypot(x, y)
    return z, s, np.arctan2(y, x)


def iter_blocks(lmax, points, gradient=False):
    """Yield ``(rows, values, grads)`` for one order |m| at a time.

    ``rows`` are basis indices, ``values`` has shape (len(rows), n) and
    ``grads`` (len(rows), n, 2) or None.  Blocks never exceed 2*(lmax+1) rows,
    which keeps memory flat when only reductions over the basis are needed.
    """
    x, s, phi = _polar(points)
    n = x.shape[0]
    if gradient and np.any(s == 0.0):
        raise ValueError("gradients are undefined at the poles in polar coordinates")
    inv_s = 1.0 / s if gradient else None
    pmm = np.full(n, 1.0 / math.sqrt(4.0 * math.pi))
    for m in range(lmax + 1):
        if m > 0:
            pmm = math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * s * pmm
        nl = lmax - m + 1
        p = np.empty((nl, n))
        p[0] = pmm
        if nl > 1:
            p[1] = math.sqrt(2.0 * m + 3.0) * x * pmm
        for j in range(2, nl):
            l = m + j
            a = math.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = math.sqrt(((l - 1.0) ** 2 - m * m) / (4.0 * (l - 1.0) ** 2 - 1.0))
            p[j] = a * (x * p[j - 1] - b * p[j - 2])
        dp = None
        if gradient:
            dp = np.empty_like(p)
            for j in range(nl):
                l = m + j
                c = math.sqrt((2.0 * l + 1.0) * (l * l - m * m) / (2.0 * l - 1.0)) if l > m else 0.0
                prev = p[j - 1] if j > 0 else 0.0
                dp[j] = (l * x * p[j] - c * prev) * inv_s
        ls = np.arange(m, lmax + 1)
        if m == 0:
            rows = ls * ls + ls
            grads = None
            if gradient:
                grads = np.stack([dp, np.zeros_like(dp)], axis=-1)
            yield rows, p, grads
            continue
        cos_m, sin_m = np.cos(m * phi), np.sin(m * phi)
        r2 = math.sqrt(2.0)
        vals = np.concatenate([r2 * p * sin_m, r2 * p * cos_m])
        rows = np.concatenate([ls * ls + ls - m, ls * ls + ls + m])
        grads = None
        if gradient:
            pd = p * inv_s
            g_sin = np.stack([r2 * dp * sin_m, r2 * m * pd * cos_m], axis=-1)
            g_cos = np.stack([r2 * dp * cos_m, -r2 * m * pd * sin_m], axis=-1)
            grads = np.concatenate([g_sin, g_cos])
        yield rows, vals, grads


def real_sph_harm(lmax, points, gradient=False):
    """All real harmonics of degree <= lmax at ``points`` (n, 3).

    Returns an array (k, n), or a pair with the (k, n, 2) gradients.
    """
    n = np.asarray(points).shape[0]
    k = degree_count(lmax)
    out = np.empty((k, n))
    grad = np.empty((k, n, 2)) if gradient else None
    for rows, vals, g in iter_blocks(lmax, points, gradient):
        out[rows] = vals
        if gradient:
            grad[rows] = g
    return (out, grad) if gradient else out
