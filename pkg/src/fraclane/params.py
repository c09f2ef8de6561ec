"""Problem parameters, the Mellin symbol of (-Delta)^s and derived constants.

The symbol ``Lambda_m(tau)`` is defined by

    (-Delta)^s (r^{-tau} E_m) = Lambda_m(tau) r^{-tau-2s} E_m,

with ``E_m`` a degree-m spherical harmonic. It follows from the Fourier
transform of ``|x|^{-a} H_m(x)`` (``H_m`` a solid harmonic):

    Lambda_m(tau) = 4^s G((n+m-tau)/2) G((m+tau+2s)/2)
                        / (G((m+tau)/2) G((n+m-tau-2s)/2)).

Tests certify it against the brute-force quadrature in :mod:`fraclane.oracle`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import brentq

from .gamma import GammaPoleError, gamma_sign, log_gamma, rgamma

POLE_EPS = 1e-8
PJL_UPPER = 1e3


class InvalidParameters(ValueError):
    pass


class ConditioningError(ArithmeticError):
    pass


class RootFindingError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ProblemParams:
    n: int
    s: float
    p: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InvalidParameters(f"dimension n must be a positive integer, got {self.n}")
        if not 0.0 < self.s < 1.0:
            raise InvalidParameters(f"s must lie in (0, 1), got {self.s}")
        if self.n <= 2 * self.s:
            raise InvalidParameters(f"need n > 2s, got n={self.n}, s={self.s}")
        crit = self.critical_exponent
        if not self.p > crit:
            raise InvalidParameters(
                f"p must be supercritical, p > (n+2s)/(n-2s) = {crit:.12g}; got p={self.p}")

    @property
    def critical_exponent(self) -> float:
        return (self.n + 2 * self.s) / (self.n - 2 * self.s)

    @property
    def tau0(self) -> float:
        return 2 * self.s / (self.p - 1)

    @property
    def half_gap(self) -> float:
        """(n-2s)/2, the symmetry point of Lambda_0."""
        return 0.5 * (self.n - 2 * self.s)

    @property
    def tilt(self) -> float:
        """Exponential tilt a = (n-2s)/2 - tau0 of the cylinder kernels."""
        return self.half_gap - self.tau0

    @property
    def translation_threshold(self) -> float:
        """(n+2s-1)/(n-2s-1); above it the mode-1 kernel leaves the dual space."""
        d = self.n - 2 * self.s - 1
        return math.inf if d <= 0 else (self.n + 2 * self.s - 1) / d


def fl_norm(n, s):
    """Constant C_{n,s} of the hypersingular integral form of (-Delta)^s."""
    return s * 4.0 ** s * math.exp(log_gamma(0.5 * n + s)) / (math.pi ** (0.5 * n) * math.exp(log_gamma(1 - s)))


def _check_pole(z, eps):
    if isinstance(z, complex) and abs(z.imag) > eps:
        return
    re = z.real if isinstance(z, complex) else z
    if re <= eps and abs(re - round(re)) < eps:
        raise ConditioningError(f"Gamma argument {z} within {eps:g} of a pole")


def symbol(params: ProblemParams, m: int, tau, eps: float = POLE_EPS):
    """Lambda_m(tau) for real or complex tau."""
    n, s = params.n, params.s
    num1 = 0.5 * (n + m - tau)
    num2 = 0.5 * (m + tau + 2 * s)
    den1 = 0.5 * (m + tau)
    den2 = 0.5 * (n + m - tau - 2 * s)
    _check_pole(num1, eps)
    _check_pole(num2, eps)
    r1, r2 = rgamma(den1), rgamma(den2)
    if r1 == 0 or r2 == 0:
        return 0.0 * tau
    if isinstance(tau, complex):
        import cmath
        lg = log_gamma(complex(num1)) + log_gamma(complex(num2))
        return 4.0 ** s * cmath.exp(lg) * r1 * r2
    sign = gamma_sign(num1) * gamma_sign(num2)
    return 4.0 ** s * sign * math.exp(log_gamma(num1) + log_gamma(num2)) * r1 * r2


@dataclass(frozen=True)
class SpectralConstants:
    beta: float
    ds: float
    hardy: float
    fl_norm: float
    stable: bool
    p_jl: float | None
    tau0: float


def singular_amplitude(consts: SpectralConstants, params: ProblemParams) -> float:
    """beta^{1/(p-1)}, the coefficient of the singular solution."""
    return consts.beta ** (1.0 / (params.p - 1))


def d_s(s):
    """2^{2s-1} Gamma(s) / (s Gamma(-s)); negative on (0, 1)."""
    return 4.0 ** s / 2 * math.exp(log_gamma(s) - log_gamma(-s)) / (s * gamma_sign(-s))


def _pjl(n, s):
    lo = (n + 2 * s) / (n - 2 * s) * (1 + 1e-8)

    def f(p):
        prm = _raw_params(n, s, p)
        return p * symbol(prm, 0, 2 * s / (p - 1)) - symbol(prm, 0, 0.5 * (n - 2 * s))
    flo, fhi = f(lo), f(PJL_UPPER)
    if flo * fhi > 0:
        return None
    return brentq(f, lo, PJL_UPPER, xtol=1e-14, rtol=1e-14, maxiter=500)


def _raw_params(n, s, p):
    obj = object.__new__(ProblemParams)
    object.__setattr__(obj, "n", n)
    object.__setattr__(obj, "s", s)
    object.__setattr__(obj, "p", p)
    return obj


def compute_constants(params: ProblemParams) -> SpectralConstants:
    beta = symbol(params, 0, params.tau0)
    hardy = symbol(params, 0, params.half_gap)
    return SpectralConstants(
        beta=beta,
        ds=d_s(params.s),
        hardy=hardy,
        fl_norm=fl_norm(params.n, params.s),
        stable=params.p * beta <= hardy,
        p_jl=_pjl(params.n, params.s),
        tau0=params.tau0,
    )


@dataclass(frozen=True)
class IndicialReport:
    """Indicial exponents gamma (phi ~ r^gamma) of mode m.

    ``roots_at_infinity`` holds two real exponents, or for a complex pair the
    tuple (real part, imaginary part) with ``complex_at_infinity`` set.
    """
    mode: int
    eigenvalue: float
    roots_at_zero: tuple[float, float]
    roots_at_infinity: tuple[float, float]
    complex_at_infinity: bool
    level: int = 0
    bracket_info: dict = field(default_factory=dict, compare=False)

    def decay_rate_at_infinity(self) -> float:
        """Slowest admissible power-law decay rate (positive number)."""
        if self.complex_at_infinity:
            return -self.roots_at_infinity[0]
        return -max(self.roots_at_infinity)


def indicial_roots(params: ProblemParams, consts: SpectralConstants, m: int) -> IndicialReport:
    if m < 0:
        raise ValueError("mode must be non-negative")
    n, s = params.n, params.s
    mu = m * (m + n - 2)
    # zeros of Lambda_m at tau = -m and tau = n+m-2s
    zero = (float(m), -(n + m - 2 * s))
    target = params.p * consts.beta
    c = 0.5 * (n - 2 * s)

    def g(tau):
        return symbol(params, m, tau) - target

    # Lambda_m is symmetric about c and increases on (-m, c); look for a root there.
    lo, hi = -m + 1e-12, c
    glo, ghi = g(lo), g(hi)
    if glo * ghi < 0:
        tau_small = brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=500)
        roots = (-tau_small, -(2 * c - tau_small))
        return IndicialReport(m, mu, zero, roots, False,
                              bracket_info={"bracket": (lo, hi), "values": (glo, ghi)})
    if ghi == 0:
        return IndicialReport(m, mu, zero, (-c, -c), False)
    if m != 0:
        raise RootFindingError(
            f"no real root of Lambda_{m}(tau) = p*beta on ({lo}, {hi}); values {glo}, {ghi}")

    # unstable mode 0: Lambda_0(c + iy) is real and increasing in y
    def gi(y):
        return symbol(params, 0, complex(c, y)).real - target

    y_hi = 1.0
    while gi(y_hi) < 0:
        y_hi *= 2
        if y_hi > 1e6:
            raise RootFindingError("imaginary part search diverged")
    y = brentq(gi, 0.0, y_hi, xtol=1e-15, rtol=1e-15, maxiter=500)
    return IndicialReport(0, 0.0, zero, (-c, y), True,
                          bracket_info={"bracket": (0.0, y_hi)})
