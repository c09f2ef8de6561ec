"""Zonal spherical harmonics on S^{n-1}, normalized to 1 at the pole."""

import math

import numpy as np
from scipy.special import eval_gegenbauer, gammaln


def zonal(m, n, x):
    """Degree-m zonal harmonic of S^{n-1} at cosine ``x``, equal to 1 at x = 1."""
    x = np.asarray(x, dtype=float)
    if m == 0:
        return np.ones_like(x)
    if n == 1:
        # S^0 = {-1, 1}: even/odd "modes"
        return np.sign(x) ** m
    if n == 2:
        return np.cos(m * np.arccos(np.clip(x, -1.0, 1.0)))
    lam = 0.5 * (n - 2)
    return eval_gegenbauer(m, lam, x) / eval_gegenbauer(m, lam, 1.0)


def sphere_area(d):
    """Surface measure of the unit sphere S^d in R^{d+1} (|S^0| = 2)."""
    return 2.0 * math.pi ** (0.5 * (d + 1)) / math.exp(gammaln(0.5 * (d + 1)))


def eigenvalue(m, n):
    return m * (m + n - 2)
