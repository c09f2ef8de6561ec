"""Brute-force quadrature of (-Delta)^s on homogeneous functions.

Used to certify the closed-form symbol; deliberately shares nothing with the
cylinder kernels except the normalization constant C_{n,s}.
"""

import math
import warnings

import numpy as np
from scipy import integrate

from .harmonics import sphere_area, zonal
from .params import ProblemParams, fl_norm

TAYLOR_CUTOFF = 1e-3


class QuadratureError(ArithmeticError):
    pass


def _f(params, m, tau, y1, ynorm):
    return ynorm ** (-tau) * zonal(m, params.n, y1 / ynorm)


def _shell_defect(params, m, tau, rho, tol):
    """Integral over unit directions omega of f(e1) - f(e1 + rho*omega)."""
    n = params.n
    if n == 1:
        vals = [_f(params, m, tau, 1 + sgn * rho, abs(1 + sgn * rho)) for sgn in (1.0, -1.0)]
        return 2.0 - vals[0] - vals[1]

    def integrand(psi):
        c = math.cos(psi)
        ynorm = math.sqrt(max(1.0 + rho * rho + 2.0 * rho * c, 0.0))
        if ynorm == 0.0:
            return 0.0
        return (1.0 - float(_f(params, m, tau, 1.0 + rho * c, ynorm))) * math.sin(psi) ** (n - 2)

    pts = None
    if abs(rho - 1.0) < 0.5:
        # the point y = 0 sits at psi = pi when rho = 1
        pts = [math.pi - min(abs(rho - 1.0) * 4 + 1e-3, 1.0)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(integrand, 0.0, math.pi, points=pts, epsabs=tol * 1e-2,
                                epsrel=tol * 1e-2, limit=400)
    return sphere_area(n - 2) * val


def fl_oracle(params: ProblemParams, m: int, tau: float, x: float = 1.0, tol: float = 1e-9) -> float:
    """(-Delta)^s (r^{-tau} Y_m) at |x| = x divided by x^{-tau-2s}.

    Evaluated at x = 1 (the answer is scale invariant) as
    C_{n,s} int_0^inf rho^{-1-2s} int_{S^{n-1}} [f(e1) - f(e1 + rho w)] dw drho.
    """
    n, s = params.n, params.s
    if not 0 < tau < n - 2 * s:
        raise ValueError("oracle needs 0 < tau < n - 2s")
    if x <= 0:
        raise ValueError("x must be positive")
    c = fl_norm(n, s)
    # small rho: second-order Taylor of the angular average,
    # int_S [f(e1) - f(e1+rho w)] dw = -rho^2 |S^{n-1}| Lap f(e1) / (2n) + O(rho^4)
    k = -tau
    lap = k * (k + n - 2) - m * (m + n - 2)
    d = TAYLOR_CUTOFF
    near = -lap * sphere_area(n - 1) / (2 * n) * d ** (2 - 2 * s) / (2 - 2 * s)

    def outer(rho):
        return rho ** (-1 - 2 * s) * _shell_defect(params, m, tau, rho, tol)

    total = near
    errs = []
    for a, b in ((d, 0.5), (0.5, 1.0), (1.0, 2.0), (2.0, 8.0)):
        val, err = integrate.quad(outer, a, b, epsabs=tol * 1e-2, epsrel=tol * 1e-2, limit=400)
        total += val
        errs.append(err)
    val, err = integrate.quad(outer, 8.0, np.inf, epsabs=tol * 1e-2, epsrel=tol * 1e-2, limit=400)
    total += val
    errs.append(err)
    res = c * total
    if sum(errs) * c > tol * max(abs(res), 1.0) * 10:
        raise QuadratureError(f"oracle quadrature error estimate {sum(errs) * c:g} above tolerance")
    return res
