"""The nonlocal operator on the cylinder R x S^{n-1} in the variable t = -log r.

With ``v(t) = r^{tau0} w(r)`` a mode-m profile ``w = r^{-tau0} v(-log r) E_m``
obeys ``r^{tau0+2s} (-Delta)^s w = P_m v`` with

    P_m v(t) = PV int K_m(t - t') [v(t) - v(t')] dt' + beta_m v(t),
    K_m(u)   = c e^{a u} k_m(|u|),      a = (n-2s)/2 - tau0,
    k_m(u)   = int_0^pi sin^{n-2}(phi) Z_m(cos phi) / (cosh u - cos phi)^{(n+2s)/2} dphi,

``Z_m`` the zonal harmonic normalized to 1 at the pole and
``beta_m = Lambda_m(tau0)``.  On exponentials ``P_m e^{alpha t} =
Lambda_m(alpha + tau0) e^{alpha t}``, which is how tables are calibrated.

Discretization
--------------
Writing ``u = t - t'`` and pairing the lags ``+u`` and ``-u`` gives

    PV(t) = c int_0^inf k_m(u) [cosh(a u) g(u) + sinh(a u) d(u)] du,
    g(u) = 2 v(t) - v(t-u) - v(t+u),   d(u) = v(t+u) - v(t-u),

with ``g`` even and ``d`` odd in ``u``.  The integral is done by product
integration: on the first cell ``g`` and ``d`` are replaced by their
parity-respecting polynomial fits (the ``u^{-1-2s}`` singularity is
integrated exactly by algebraic-weight quadrature), further cells use
piecewise degree-5 Lagrange interpolation of the one-sided differences
against ``e^{+-a u} k_m``.  Values beyond the grid come
from analytic tail models.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .harmonics import sphere_area, zonal
from .params import ProblemParams, fl_norm, symbol

SERIES_CUTOFF = 1.0
SERIES_TERMS = 64
TAIL_DIGITS = 36.0
LMAX_CAP = 80.0
LAGRANGE_HALF = 2  # cells use nodes j-2 .. j+3
CELL_GAUSS = 16
VALIDATION_TOL = 1e-5
ALPHA_CAP = 3.0
DEFAULT_T = 20.0
DEFAULT_H = 0.05


class KernelDomainError(ValueError):
    pass


class CalibrationError(ArithmeticError):
    def __init__(self, msg, residuals=None):
        super().__init__(msg)
        self.residuals = residuals or {}


class TailContractError(ValueError):
    pass


# ----------------------------------------------------------------------------
# grids and grid functions


@dataclass(frozen=True)
class CylinderGrid:
    T: float = DEFAULT_T
    h: float = DEFAULT_H

    def __post_init__(self):
        if not (self.T > 0 and self.h > 0):
            raise ValueError("T and h must be positive")
        k = 2 * self.T / self.h
        if abs(k - round(k)) > 1e-9 * k:
            raise ValueError(f"2T/h must be an integer, got {k}")
        if round(k) + 1 < 64:
            raise ValueError("grid needs at least 64 nodes")

    @property
    def size(self) -> int:
        return int(round(2 * self.T / self.h)) + 1

    @property
    def nodes(self) -> np.ndarray:
        return -self.T + self.h * np.arange(self.size)


@dataclass(frozen=True)
class Tail:
    """Tail model ``limit + amp b1(d) + amp2 b2(d)`` beyond the last node.

    ``d >= 0`` is the distance from the boundary node, measured outward, and
    ``b1 = e^{-rate d} cos(freq d)``.  The second basis function vanishes at
    ``d = 0``: ``e^{-rate d} sin(freq d)`` when ``freq`` is set, otherwise
    ``e^{-rate2 d} - e^{-rate d}`` when ``rate2`` is set.  A positive rate
    means the correction decays away from the grid.
    """
    limit: float = 0.0
    rate: float = 0.0
    amp: float = 0.0
    amp2: float = 0.0
    freq: float = 0.0
    rate2: float | None = None

    def __call__(self, d):
        d = np.asarray(d, dtype=float)
        b1, b2 = _tail_basis(self.rate, self.freq, self.rate2, d)
        out = self.limit + self.amp * b1
        return out if b2 is None else out + self.amp2 * b2

    @property
    def boundary_value(self) -> float:
        return self.limit + self.amp


def _tail_basis(rate, freq, rate2, d):
    env = np.exp(-rate * d)
    if freq != 0.0:
        return env * np.cos(freq * d), env * np.sin(freq * d)
    if rate2 is not None:
        return env, np.exp(-rate2 * d) - env
    return env, None


@dataclass(frozen=True)
class GridFunction:
    """Samples on a :class:`CylinderGrid` together with left/right tails."""
    grid: CylinderGrid
    values: np.ndarray
    left: Tail | None
    right: Tail | None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.size,):
            raise ValueError(f"expected {self.grid.size} values, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    def check_tails(self, tol=1e-8):
        if self.left is None or self.right is None:
            raise TailContractError("grid function is missing a tail model")
        for tail, val, side in ((self.left, self.values[0], "left"), (self.right, self.values[-1], "right")):
            if abs(tail.boundary_value - val) > tol * max(1.0, abs(val)):
                raise TailContractError(
                    f"{side} tail gives {tail.boundary_value!r} at the boundary node, value is {val!r}")

    def extended(self, pad: int) -> np.ndarray:
        """Values on the grid padded by ``pad`` tail samples on each side."""
        self.check_tails()
        d = self.grid.h * np.arange(pad, 0, -1)
        left = self.left(d)
        right = self.right(d[::-1])
        return np.concatenate([left, self.values, right])

    def __call__(self, t):
        """Evaluate at arbitrary ``t`` (cubic interpolation inside, tails outside)."""
        from scipy.interpolate import CubicSpline
        t = np.asarray(t, dtype=float)
        g = self.grid
        out = np.empty_like(t)
        lo, hi = t < -g.T, t > g.T
        mid = ~(lo | hi)
        out[mid] = CubicSpline(g.nodes, self.values)(t[mid])
        out[lo] = self.left(-g.T - t[lo])
        out[hi] = self.right(t[hi] - g.T)
        return out

    @classmethod
    def exponential(cls, grid: CylinderGrid, alpha: float, scale: float = 1.0):
        t = grid.nodes
        return cls(grid, scale * np.exp(alpha * t),
                   Tail(0.0, alpha, scale * math.exp(-alpha * grid.T)),
                   Tail(0.0, -alpha, scale * math.exp(alpha * grid.T)))

    @classmethod
    def constant(cls, grid: CylinderGrid, value: float):
        return cls(grid, np.full(grid.size, float(value)), Tail(float(value)), Tail(float(value)))


@dataclass(frozen=True)
class TailRule:
    """Recipe turning boundary values into a :class:`Tail`.

    The first amplitude is fixed by continuity with the boundary node, unless
    ``fixed_amp`` is given.  When the tail has a second basis function
    (``freq`` or ``rate2`` set) its amplitude is fitted by least squares over
    the ``fit_nodes`` nodes nearest the boundary, using the tail formula
    continued inward.
    """
    limit: float = 0.0
    rate: float = 0.0
    freq: float = 0.0
    fit_nodes: int = 1
    fixed_amp: float | None = None
    rate2: float | None = None

    def _coefficients(self, h):
        """Linear maps (amp, amp2) <- boundary-inward values minus ``limit``."""
        k = max(self.fit_nodes, 1)
        ca = np.zeros(k)
        cb = np.zeros(k)
        fa = fb = 0.0
        if self.fixed_amp is None:
            ca[0] = 1.0
        else:
            fa = self.fixed_amp
        b1, b2 = _tail_basis(self.rate, self.freq, self.rate2, -h * np.arange(k))
        if b2 is not None and k > 1:
            # residual y_k - amp b1_k - amp2 b2_k, minimized over amp2
            ss = float(b2 @ b2)
            cb = b2 / ss - (b2 @ b1) / ss * ca
            fb = -(b2 @ b1) / ss * fa
        return ca, fa, cb, fb

    def tail(self, inward: np.ndarray, h: float) -> Tail:
        ca, fa, cb, fb = self._coefficients(h)
        y = np.asarray(inward[:len(ca)], dtype=float) - self.limit
        return Tail(self.limit, self.rate, float(ca @ y + fa), float(cb @ y + fb), self.freq, self.rate2)

    def extension(self, h: float, pad: int, size: int):
        """Matrix ``E`` (pad x size) and offset ``f`` with tail samples ``E v + f``.

        Row ``i`` holds the sample at outward distance ``(pad - i) h``; columns
        index the values ordered from the boundary inward.
        """
        ca, fa, cb, fb = self._coefficients(h)
        k = len(ca)
        d = h * np.arange(pad, 0, -1)
        b1, b2 = _tail_basis(self.rate, self.freq, self.rate2, d)
        if b2 is None:
            b2 = np.zeros_like(d)
        E = np.zeros((pad, size))
        E[:, :k] = np.outer(b1, ca) + np.outer(b2, cb)
        f = self.limit + b1 * (fa - self.limit * ca.sum()) + b2 * (fb - self.limit * cb.sum())
        return E, f


def with_tails(grid: CylinderGrid, values, left: TailRule, right: TailRule) -> GridFunction:
    values = np.asarray(values, dtype=float)
    return GridFunction(grid, values, left.tail(values, grid.h), right.tail(values[::-1], grid.h))


# ----------------------------------------------------------------------------
# kernel evaluation


def _half_exponent(params):
    return 0.5 * (params.n + 2 * params.s)


def _series_coefficients(params: ProblemParams, m: int, terms: int = SERIES_TERMS):
    """P_k = int C_k^{q}(x) Z_m(x) dmu(x) for the expansion in e^{-u}.

    Uses the generating function (1 - 2xz + z^2)^{-q} = sum C_k^q(x) z^k with
    z = e^{-u}, so that k_m(u) = 2^q e^{-q u} sum_k P_k e^{-k u}.
    """
    n = params.n
    q = _half_exponent(params)
    if n == 1:
        x = np.array([1.0, -1.0])
        w = np.ones(2)
    else:
        al = 0.5 * (n - 3)
        x, w = special.roots_jacobi(terms + m + 8, al, al)
    zm = zonal(m, n, x)
    ks = np.arange(terms)
    coef = np.array([w @ (special.eval_gegenbauer(k, q, x) * zm) for k in ks])
    coef[(ks < m) | ((ks - m) % 2 == 1)] = 0.0
    return coef


def _angular_series(params, m, u, coef):
    q = _half_exponent(params)
    z = np.exp(-u)
    acc = np.zeros_like(u)
    for ck in coef[::-1]:
        acc = acc * z + ck
    return 2.0 ** q * np.exp(-q * u) * acc


_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)


def _angular_panels(params, m, u):
    """Composite Gauss-Legendre in phi with panels graded geometrically at scale u."""
    n = params.n
    q = _half_exponent(params)
    sh = 2.0 * np.sinh(0.5 * u) ** 2
    if n == 1:
        return sh ** (-q) + zonal(m, 1, -1.0) * (sh + 2.0) ** (-q)
    edges = u[:, None] * 2.0 ** np.arange(-4, 46)[None, :]
    edges = np.minimum(edges, math.pi)
    edges = np.concatenate([np.zeros((len(u), 1)), edges, np.full((len(u), 1), math.pi)], axis=1)
    a, b = edges[:, :-1], edges[:, 1:]
    half = 0.5 * (b - a)
    phi = (a + half)[..., None] + half[..., None] * _GL_X
    f = np.sin(phi) ** (n - 2) * (sh[:, None, None] + 2.0 * np.sin(0.5 * phi) ** 2) ** (-q)
    if m:
        f = f * zonal(m, n, np.cos(phi))
    return np.einsum("upg,g,up->u", f, _GL_W, half)


class AngularKernel:
    """Vectorized evaluator of the even kernel k_m(u), u > 0."""

    def __init__(self, params: ProblemParams, m: int):
        self.params = params
        self.m = m
        self.coef = _series_coefficients(params, m)

    def __call__(self, u):
        u = np.abs(np.asarray(u, dtype=float))
        scalar = u.ndim == 0
        u = np.atleast_1d(u)
        out = np.empty_like(u)
        big = u >= SERIES_CUTOFF
        if big.any():
            out[big] = _angular_series(self.params, self.m, u[big], self.coef)
        if (~big).any():
            out[~big] = _angular_panels(self.params, self.m, u[~big])
        return out[0] if scalar else out


def kernel_eval(params: ProblemParams, m: int, t):
    """Un-normalized kernel e^{a t} k_m(|t|) (the constant c is not included)."""
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) < 1e-12):
        raise KernelDomainError("kernel is singular at lag 0 (|t| < 1e-12)")
    return np.exp(params.tilt * t) * AngularKernel(params, m)(t)


def singular_strength(params: ProblemParams) -> float:
    """kappa with k_m(u) ~ kappa u^{-1-2s} as u -> 0 (same for every m)."""
    n, s = params.n, params.s
    q = _half_exponent(params)
    if n == 1:
        return 2.0 ** q
    # int_0^inf x^{n-2} ((1 + x^2)/2)^{-q} dx times the sphere factor of the small cap
    return 2.0 ** q * 0.5 * special.beta(0.5 * (n - 1), 0.5 + s)


def analytic_constant(params: ProblemParams) -> float:
    """c = C_{n,s} 2^{-(n+2s)/2} |S^{n-2}| (|S^0| replaced by 1 for n = 1)."""
    n = params.n
    area = 1.0 if n == 1 else sphere_area(n - 2)
    return fl_norm(n, params.s) * 2.0 ** (-_half_exponent(params)) * area


def decay_rates(params: ProblemParams, m: int):
    """(right, left) exponential decay rates of K_m as u -> +inf / -inf."""
    return 2 * params.s + params.tau0 + m, params.n - params.tau0 + m


# ----------------------------------------------------------------------------
# product-integration weights


def _lagrange_matrix(nodes, x):
    """L[k, g] = k-th Lagrange cardinal through ``nodes`` evaluated at x[g]."""
    L = np.ones((len(nodes), len(x)))
    for k, xk in enumerate(nodes):
        for j, xj in enumerate(nodes):
            if j != k:
                L[k] *= (x - xj) / (xk - xj)
    return L


def _first_cell(params, kern, h, a):
    """Weights on nodes 1..3 for the cell [0, h] from parity-respecting fits."""
    s = params.s
    nodes = h * np.arange(1, 4)

    kappa = singular_strength(params)

    def regular(u):
        return kappa if u == 0 else kern(u) * u ** (1 + 2 * s)

    def even_part(u):
        return regular(u) * np.cosh(a * u)

    def odd_part(u):
        return regular(u) * (a if u == 0 else np.sinh(a * u) / u)

    mom_g = np.empty(3)
    mom_d = np.empty(3)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        for i in range(3):
            ex = 2 * (i + 1) - 1 - 2 * s
            mom_g[i] = integrate.quad(even_part, 0.0, h, weight="alg", wvar=(ex, 0.0),
                                      epsabs=0.0, epsrel=1e-13, limit=200)[0]
            mom_d[i] = integrate.quad(odd_part, 0.0, h, weight="alg", wvar=(ex, 0.0),
                                      epsabs=0.0, epsrel=1e-13, limit=200)[0]
    # g ~ sum c_i u^{2i}, d ~ sum e_i u^{2i-1}, i = 1..3, interpolating nodes 1..3
    Vg = nodes[:, None] ** (2 * np.arange(1, 4))[None, :]
    Vd = nodes[:, None] ** (2 * np.arange(1, 4) - 1)[None, :]
    wg = np.linalg.solve(Vg.T, mom_g)
    wd = np.linalg.solve(Vd.T, mom_d)
    return wg, wd


def lag_weights(params: ProblemParams, m: int, h: float, lmax: float):
    """One-sided weights (Wb, Wa), j = 0..P, with

        PV(t_i) = c sum_j Wb[j] (v_i - v_{i-j}) + Wa[j] (v_i - v_{i+j}).

    ``Wb`` carries the kernel e^{a u} k_m(u) and ``Wa`` carries e^{-a u} k_m(u);
    they are accumulated separately so neither is a difference of large
    numbers far from the diagonal.
    """
    a = params.tilt
    kern = AngularKernel(params, m)
    cells = int(math.ceil(lmax / h))
    pad = cells + LAGRANGE_HALF + 1
    Wb = np.zeros(pad + 1)
    Wa = np.zeros(pad + 1)
    wg0, wd0 = _first_cell(params, kern, h, a)
    # g = (v_i - v_{i-j}) + (v_i - v_{i+j}),  d = (v_i - v_{i-j}) - (v_i - v_{i+j})
    Wb[1:4] += wg0 + wd0
    Wa[1:4] += wg0 - wd0

    gx, gw = np.polynomial.legendre.leggauss(CELL_GAUSS)
    xi = 0.5 * (gx + 1.0)
    gw = 0.5 * gw
    rel = np.arange(-LAGRANGE_HALF, LAGRANGE_HALF + 2)
    L = _lagrange_matrix(rel.astype(float), xi)  # (6, G)
    j = np.arange(1, cells)
    u = h * (j[:, None] + xi[None, :])
    ku = kern(u.ravel()).reshape(u.shape) * h
    mb = (ku * np.exp(a * u) * gw) @ L.T  # (cells-1, 6)
    ma = (ku * np.exp(-a * u) * gw) @ L.T
    for col, r in enumerate(rel):
        idx = j + r
        # a node at negative lag -k is the opposite one-sided difference at +k
        refl = idx < 0
        idx = np.abs(idx)
        np.add.at(Wb, idx, np.where(refl, ma[:, col], mb[:, col]))
        np.add.at(Wa, idx, np.where(refl, mb[:, col], ma[:, col]))
    Wb[0] = 0.0
    Wa[0] = 0.0
    return Wb, Wa


def _stencil(Wb, Wa, c):
    """Offsets -P..P of the PV stencil acting on differences v_{i+l} - v_i."""
    pad = len(Wb) - 1
    w = np.zeros(2 * pad + 1)
    w[pad + 1:] = -c * Wa[1:]
    w[:pad] = (-c * Wb[1:])[::-1]
    return w


# ----------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class KernelTable:
    params: ProblemParams
    mode: int
    h: float
    c: float
    c_analytic: float
    beta: float
    lmax: float
    weights_behind: np.ndarray = field(repr=False)
    weights_ahead: np.ndarray = field(repr=False)
    stencil: np.ndarray = field(repr=False)
    tilt: float = 0.0
    singular_strength: float = 0.0
    decay_right: float = 0.0
    decay_left: float = 0.0
    calibration_alpha: float = 0.0
    validation: dict = field(default_factory=dict)

    @property
    def pad(self) -> int:
        return (len(self.stencil) - 1) // 2

    def kernel_samples(self, count: int | None = None):
        """(lags, c * kernel values) on the lag grid, both signs, lag 0 excluded."""
        count = count or int(self.lmax / self.h)
        u = self.h * np.arange(1, count + 1)
        k = AngularKernel(self.params, self.mode)(u) * self.c
        lags = np.concatenate([-u[::-1], u])
        vals = np.concatenate([(k * np.exp(-self.tilt * u))[::-1], k * np.exp(self.tilt * u)])
        return lags, vals

    def to_csv(self, path, count: int | None = None):
        lags, vals = self.kernel_samples(count)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["lag", "value"])
            for a, b in zip(lags, vals):
                wr.writerow([f"{a:.17g}", f"{b:.17g}"])


def _pv(stencil, ext, pad):
    n = len(ext) - 2 * pad
    core = ext[pad:pad + n]
    out = np.zeros(n)
    for off in range(-pad, pad + 1):
        if off == 0:
            continue
        out += stencil[pad + off] * (ext[pad + off:pad + off + n] - core)
    return out


def default_lmax(params: ProblemParams, m: int) -> float:
    n, s = params.n, params.s
    slowest = 2 * s + 0.1 * (n + 2 * m - 2 * s)
    return min(TAIL_DIGITS / slowest, LMAX_CAP)


def validation_exponents(params: ProblemParams, m: int):
    """Calibration exponent and five checks where Lambda_m(alpha + tau0) > 0.

    The band stays away from the zeros of the symbol and is clipped to
    |alpha| <= ALPHA_CAP so the test functions stay resolved at h = 0.05.
    """
    lo = -m - params.tau0
    width = params.n + 2 * m - 2 * params.s
    a_lo = max(lo + 0.15 * width, -ALPHA_CAP)
    a_hi = min(lo + 0.85 * width, ALPHA_CAP)
    checks = list(np.linspace(a_lo, a_hi, 5))
    cal = a_lo + 0.4 * (a_hi - a_lo)
    if abs(cal) < 0.05 * (a_hi - a_lo):
        cal = a_lo + 0.45 * (a_hi - a_lo)
    return cal, checks


def symbol_errors(table: KernelTable, grid: CylinderGrid, alphas):
    out = {}
    for al in alphas:
        u = GridFunction.exponential(grid, al)
        got = apply_operator(table, u)
        want = symbol(table.params, table.mode, al + table.params.tau0) * u.values
        out[float(al)] = float(np.max(np.abs(got - want) / np.abs(want)))
    return out


def calibrate(params: ProblemParams, m: int, grid: CylinderGrid, tol: float = VALIDATION_TOL,
              lmax: float | None = None, alphas=None) -> KernelTable:
    """Build the weight table and fix c_m from the symbol at one exponent.

    Raises :class:`CalibrationError` if the symbol is missed by more than
    ``tol`` (relative, sup over nodes) at any validation exponent.
    """
    if m < 0:
        raise ValueError("mode must be non-negative")
    lmax = default_lmax(params, m) if lmax is None else lmax
    Wb, Wa = lag_weights(params, m, grid.h, lmax)
    beta = symbol(params, m, params.tau0)
    cal, checks = validation_exponents(params, m)
    if alphas is not None:
        checks = list(alphas)
    right, left = decay_rates(params, m)
    unit = KernelTable(params, m, grid.h, 1.0, analytic_constant(params), 0.0, lmax, Wb, Wa,
                       _stencil(Wb, Wa, 1.0), params.tilt, singular_strength(params), right, left)
    u = GridFunction.exponential(grid, cal)
    raw = apply_operator(unit, u) / u.values
    mid = slice(grid.size // 4, 3 * grid.size // 4 + 1)
    c = float(np.mean((symbol(params, m, cal + params.tau0) - beta) / raw[mid]))
    table = KernelTable(params, m, grid.h, c, unit.c_analytic, beta, lmax, Wb, Wa,
                        _stencil(Wb, Wa, c), params.tilt, unit.singular_strength, right, left, cal)
    errs = symbol_errors(table, grid, checks)
    object.__setattr__(table, "validation", errs)
    bad = {k: v for k, v in errs.items() if not v <= tol}
    if bad:
        raise CalibrationError(f"symbol mismatch above {tol:g} at exponents {sorted(bad)}", errs)
    return table


# ----------------------------------------------------------------------------
# application


def apply_operator(table: KernelTable, u: GridFunction) -> np.ndarray:
    """P_m u at the grid nodes; tails supply the values beyond +-T."""
    if abs(u.grid.h - table.h) > 1e-12 * table.h:
        raise ValueError("grid spacing differs from the table's")
    pad = table.pad
    ext = u.extended(pad)
    return _pv(table.stencil, ext, pad) + table.beta * u.values


def extended_matrix(table: KernelTable, size: int) -> np.ndarray:
    """Dense matrix A (size x size+2P) of the PV part acting on padded values."""
    pad = table.pad
    A = np.zeros((size, size + 2 * pad))
    rows = np.arange(size)
    total = 0.0
    for off in range(-pad, pad + 1):
        if off == 0:
            continue
        A[rows, rows + pad + off] = table.stencil[pad + off]
        total += table.stencil[pad + off]
    A[rows, rows + pad] = -total
    return A


def operator_matrix(table: KernelTable, grid: CylinderGrid, left: TailRule, right: TailRule):
    """Affine form ``P_m v = M v + f`` with tails generated by the two rules."""
    size, pad = grid.size, table.pad
    A = extended_matrix(table, size)
    El, fl = left.extension(grid.h, pad, size)
    Er, fr = right.extension(grid.h, pad, size)
    # right rule sees values ordered from the boundary inward; samples listed outward-first
    Er = Er[::-1, ::-1]
    fr = fr[::-1]
    M = A[:, pad:pad + size] + A[:, :pad] @ El + A[:, pad + size:] @ Er
    M[np.arange(size), np.arange(size)] += table.beta
    f = A[:, :pad] @ fl + A[:, pad + size:] @ fr
    return M, f
