"""Linearization around the entire solution, mode by mode on the cylinder.

With ``eta = r^{tau0} phi`` and ``h~ = r^{tau0+2s} h`` the radial-times-Y_m part of
``(-Delta)^s phi - p w^{p-1} phi = h`` reads

    L_m eta = P_m eta - V eta = h~,      V = r^{2s} p w^{p-1} = p v^{p-1}.

The scaling and translation kernels become

    z0 = r w' + tau0 w     <->  eta0 = -v'(t),
    w'                     <->  eta1 = -e^{t} (tau0 v + v'(t)).

``P_m`` is self-adjoint for the weight ``e^{-2 a t}``, ``a = (n-2s)/2 - tau0``, which
is the physical volume element ``r^{n-1} dr`` in these variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
import numpy as np
from scipy import linalg

from .cylinder import (CylinderGrid, GridFunction, KernelTable, Tail, TailRule, _pv, _tail_basis,
                       extended_matrix, operator_matrix)
from .entire import EntireSolution
from .params import ProblemParams, SpectralConstants, compute_constants, indicial_roots

FD8 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])
ORTHO_TOL = 1e-6
MARGINAL = 1e-9  # exponents this close to the weight count as bounded
FIT_SPAN = 4.0
CLEAN_LEVEL = 1e-6  # relative size where the translation kernel is continued analytically


class SolvabilityError(ArithmeticError):
    """The load has a component along the translation kernel that cannot be solved away."""


@dataclass(frozen=True)
class PotentialProfile:
    params: ProblemParams
    V: GridFunction
    limit: float  # p * beta

    @property
    def values(self) -> np.ndarray:
        return self.V.values

    def right_exponent(self, span: float = FIT_SPAN) -> float:
        """Fitted decay rate of V as t -> +inf (expected (p-1) tau0 = 2s)."""
        t = self.V.grid.nodes
        sel = t >= t[-1] - span
        return float(-np.polyfit(t[sel], np.log(self.V.values[sel]), 1)[0])


def build_potential(sol: EntireSolution, consts: SpectralConstants | None = None) -> PotentialProfile:
    params = sol.params
    consts = consts or compute_constants(params)
    p = params.p
    v = sol.v
    vals = p * v.values ** (p - 1)
    lim = p * consts.beta
    L = v.left
    # first-order tails: V - p beta ~ p (p-1) v_inf^{p-2} (v - v_inf) on the left
    left = Tail(lim, L.rate, vals[0] - lim, 0.0, L.freq, None)
    right = Tail(0.0, (p - 1) * params.tau0, vals[-1])
    return PotentialProfile(params, GridFunction(v.grid, vals, left, right), lim)


@dataclass(frozen=True)
class WeightedNorms:
    """The weighted sup norms in cylinder variables.

    ``||phi||_* = sup_{t>=0} e^{(tau0-sigma)t}|eta| + sup_{t<=0}|eta|`` and
    ``||h||_**`` is the same expression in ``h~``.  Tails decay faster than the
    weights outside the window, so the sups are taken on the grid.
    """
    params: ProblemParams
    sigma: float | None = None

    def __post_init__(self):
        tau0 = self.params.tau0
        bound = min(tau0, self.params.n - 2 * self.params.s)
        if self.sigma is None:
            object.__setattr__(self, "sigma", 0.45 * bound)
        if not 0 < self.sigma < bound:
            raise ValueError(f"sigma must lie in (0, {bound:.6g})")

    def weights(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, np.exp((self.params.tau0 - self.sigma) * np.maximum(t, 0.0)), 1.0)

    def _split(self, t, vals):
        w = self.weights(t) * np.abs(vals)
        pos, neg = t >= 0, t <= 0
        return (float(w[pos].max()) if pos.any() else 0.0) + (float(w[neg].max()) if neg.any() else 0.0)

    def star_cyl(self, t, eta) -> float:
        return self._split(t, eta)

    def star_star_cyl(self, t, htilde) -> float:
        return self._split(t, htilde)

    def star(self, r, phi) -> float:
        """||phi||_* from physical samples phi(r)."""
        r = np.asarray(r, dtype=float)
        return self.star_cyl(-np.log(r), r ** self.params.tau0 * np.asarray(phi))

    def star_star(self, r, h) -> float:
        r = np.asarray(r, dtype=float)
        return self.star_star_cyl(-np.log(r), r ** (self.params.tau0 + 2 * self.params.s) * np.asarray(h))


def volume_weights(params: ProblemParams, grid: CylinderGrid) -> np.ndarray:
    """Trapezoid weights of r^{n-1} dr acting on products eta * h~ (or eta * eta)."""
    a = 0.5 * (params.n - 2 * params.s) - params.tau0
    w = np.full(grid.size, grid.h)
    w[[0, -1]] *= 0.5
    return w * np.exp(-2 * a * grid.nodes)


# ----------------------------------------------------------------------------
# kernels


def _derivative_extended(v: GridFunction, pad: int):
    """(t, v, v') on the grid padded by ``pad`` nodes per side, v' by 8th-order differences."""
    g = v.grid
    k = (len(FD8) - 1) // 2
    ext = v.extended(pad + k)
    dv = np.convolve(ext, FD8[::-1], mode="valid") / g.h
    t = g.h * np.arange(-pad, g.size + pad) - g.T
    return t, ext[k:-k], dv


@dataclass(frozen=True)
class KernelReport:
    h: float
    z0_residual: float
    z0_relative: float
    w1_residual: float
    w1_relative: float
    z0_decay_exponent: float  # physical exponent of z0 as r -> inf
    w1_decay_exponent: float  # physical exponent of w' as r -> inf

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def kernel_functions(sol: EntireSolution, pad: int = 0):
    """Cylinder samples (t, eta0, eta1) of z0 and w' on the (padded) grid."""
    tau0 = sol.params.tau0
    t, v, dv = _derivative_extended(sol.v, pad)
    e1 = -np.exp(t) * (tau0 * v + dv)
    # tau0 v + v' cancels toward the origin; continue by the regular behavior r^1
    peak = int(np.argmax(np.abs(e1)))
    small = np.nonzero(np.abs(e1[peak:]) <= CLEAN_LEVEL * abs(e1[peak]))[0]
    if small.size:
        j = peak + small[0]
        e1[j:] = e1[j] * np.exp(-(tau0 + 1) * (t[j:] - t[j]))
    return t, -dv, e1


def _apply_padded(table: KernelTable, pot: PotentialProfile, eta_ext, pad_used):
    """L_m eta on the grid from values padded by ``pad_used`` >= table.pad."""
    extra = pad_used - table.pad
    ext = eta_ext[extra:len(eta_ext) - extra] if extra else eta_ext
    core = ext[table.pad:-table.pad]
    return _pv(table.stencil, ext, table.pad) + (table.beta - pot.values) * core


def _log_slope(t, y, sel):
    y = np.abs(y[sel])
    t = t[sel]
    keep = y > 0
    # fit the envelope through local maxima when the tail oscillates
    peaks = np.r_[False, (y[1:-1] >= y[:-2]) & (y[1:-1] >= y[2:]), False]
    if peaks.sum() >= 3:
        keep = peaks
    return float(np.polyfit(t[keep], np.log(y[keep]), 1)[0])


def kernel_residuals(sol: EntireSolution, pot: PotentialProfile, table0: KernelTable,
                     table1: KernelTable) -> KernelReport:
    """Discrete residuals of L_0 z0 and L_1 w'."""
    if table0.mode != 0 or table1.mode != 1:
        raise ValueError("need the mode-0 and mode-1 tables")
    pad = max(table0.pad, table1.pad)
    t, e0, e1 = kernel_functions(sol, pad)
    r0 = _apply_padded(table0, pot, e0, pad)
    r1 = _apply_padded(table1, pot, e1, pad)
    core = slice(pad, pad + sol.grid.size)
    tc = t[core]
    tau0 = sol.params.tau0
    far = tc <= tc[0] + FIT_SPAN * 2
    # eta ~ e^{k t} as t -> -inf means phi ~ r^{-tau0 - k}
    z0_exp = -tau0 - _log_slope(tc, e0[core], far)
    w1_exp = -tau0 - _log_slope(tc, e1[core], far)
    return KernelReport(table0.h, float(np.max(np.abs(r0))), float(np.max(np.abs(r0)) / np.max(np.abs(e0[core]))),
                        float(np.max(np.abs(r1))), float(np.max(np.abs(r1)) / np.max(np.abs(e1[core]))),
                        z0_exp, w1_exp)


# ----------------------------------------------------------------------------
# solves


def left_rule(params: ProblemParams, consts: SpectralConstants, grid: CylinderGrid, m: int) -> TailRule:
    """Bounded far-field behavior of mode m: indicial exponents gamma with tau0 + gamma <= 0.

    When two behaviors qualify the second amplitude is left free
    (``fit_nodes = 1``); :func:`assemble` adds it as an unknown.
    """
    rep = indicial_roots(params, consts, m)
    tau0 = params.tau0
    if rep.complex_at_infinity:
        return TailRule(0.0, -rep.roots_at_infinity[0] - tau0, freq=rep.roots_at_infinity[1])
    rates = sorted({max(-g - tau0, 0.0) for g in rep.roots_at_infinity if tau0 + g <= MARGINAL})
    if not rates:
        raise ArithmeticError(f"mode {m} has no bounded far-field behavior")
    if len(rates) == 1:
        return TailRule(0.0, rates[0])
    return TailRule(0.0, rates[0], rate2=rates[1])


def right_rule(params: ProblemParams, m: int) -> TailRule:
    """Regular behavior phi ~ r^m at the origin."""
    return TailRule(0.0, params.tau0 + m)


@dataclass(frozen=True)
class LinearSolution:
    params: ProblemParams
    mode: int
    psi: GridFunction
    phi_star: float
    h_star: float
    ratio: float
    C_estimate: float
    residual: float  # sup |L psi - h~| / sup |h~| (h~ after projection when one is applied)
    orthogonality: float  # cosine between h and the translation kernel (mode 1), else nan
    projection: float = 0.0  # relative l2 size of the component removed by the discrete projection

    def physical(self, r=None):
        """(r, phi) with phi = r^{-tau0} psi(-log r)."""
        g = self.psi.grid
        if r is None:
            r = np.exp(-g.nodes[::-1])
        r = np.asarray(r, dtype=float)
        return r, r ** (-self.params.tau0) * self.psi(-np.log(r))


@dataclass
class LinearizedOperator:
    """Assembled L_m with bounded tails at both ends and its gauge row.

    Unknowns are the grid values plus, when the far field admits two bounded
    behaviors, the amplitude of the second one (``extra`` is its column).
    """
    params: ProblemParams
    mode: int
    grid: CylinderGrid
    M: np.ndarray
    left: TailRule
    right: TailRule
    extra: np.ndarray | None
    kernel: np.ndarray  # eta of z0 (m = 0) or w' (m = 1)
    weights: np.ndarray  # volume weights
    needs_orthogonality: bool
    _solution_map: np.ndarray | None = field(default=None, repr=False)
    _svd: tuple | None = field(default=None, repr=False)

    def _null_pair(self):
        """(left, right) unit singular vectors of the smallest singular value of M."""
        if self._svd is None:
            U, S, Vt = linalg.svd(self.M)
            self._svd = (U[:, -1], Vt[-1])
        return self._svd

    def cokernel(self) -> np.ndarray:
        return self._null_pair()[0]

    @property
    def gauge(self) -> np.ndarray:
        """Gauge row: orthogonality to the kernel.

        With a square M (one bounded far-field behavior) its near-null
        direction is used directly, which keeps the residual at roundoff;
        otherwise the volume inner product with the kernel function.
        """
        if self.extra is None:
            v = self._null_pair()[1]
            return v * np.sign(v @ self.kernel)
        g = self.weights * self.kernel
        return g / np.linalg.norm(g)

    @property
    def unknowns(self) -> int:
        return self.grid.size + (self.extra is not None)

    def stacked(self) -> np.ndarray:
        N = self.grid.size
        A = np.zeros((N + 1, self.unknowns))
        A[:N, :N] = self.M
        if self.extra is not None:
            A[:N, N] = self.extra
        A[N, :N] = self.gauge
        return A

    def solution_map(self) -> np.ndarray:
        """Matrix S (unknowns x N) with x = S h~."""
        if self._solution_map is None:
            N = self.grid.size
            rhs = np.vstack([np.eye(N), np.zeros((1, N))])
            self._solution_map = linalg.lstsq(self.stacked(), rhs, lapack_driver="gelsd")[0]
        return self._solution_map

    def apply(self, x) -> np.ndarray:
        N = self.grid.size
        out = self.M @ x[:N]
        return out + x[N] * self.extra if self.extra is not None else out

    def tails(self, x):
        N, h = self.grid.size, self.grid.h
        L = self.left.tail(x[:N], h)
        amp2 = float(x[N]) if self.extra is not None else 0.0
        L = Tail(L.limit, L.rate, L.amp, amp2, L.freq, L.rate2)
        return L, self.right.tail(x[:N][::-1], h)


def assemble(sol: EntireSolution, pot: PotentialProfile, table: KernelTable,
             consts: SpectralConstants | None = None) -> LinearizedOperator:
    params = sol.params
    consts = consts or compute_constants(params)
    m = table.mode
    if m not in (0, 1):
        raise ValueError("only modes 0 and 1 carry kernels")
    grid = sol.grid
    lr, rr = left_rule(params, consts, grid, m), right_rule(params, m)
    M, f = operator_matrix(table, grid, lr, rr)
    M = M - np.diag(pot.values)
    extra = None
    if lr.freq != 0.0 or lr.rate2 is not None:
        pad = table.pad
        A = extended_matrix(table, grid.size)
        _, b2 = _tail_basis(lr.rate, lr.freq, lr.rate2, grid.h * np.arange(pad, 0, -1))
        extra = A[:, :pad] @ b2
    _, e0, e1 = kernel_functions(sol)
    needs = m == 1 and params.p < params.translation_threshold
    return LinearizedOperator(params, m, grid, M, lr, rr, extra, e0 if m == 0 else e1,
                              volume_weights(params, grid), needs)


def _load(op: LinearizedOperator, h):
    t = op.grid.nodes
    if callable(h):
        r = np.exp(-t)
        return r ** (op.params.tau0 + 2 * op.params.s) * np.asarray(h(r), dtype=float)
    h = np.asarray(h, dtype=float)
    if h.shape != t.shape:
        raise ValueError("load must be callable in r or sampled on the cylinder grid")
    return h


def orthogonality(op: LinearizedOperator, htilde) -> float:
    """Cosine of the angle between h and the kernel in the volume inner product."""
    w = op.weights
    k = op.kernel
    num = float(np.sum(w * htilde * k))
    den = math.sqrt(float(np.sum(w * htilde ** 2)) * float(np.sum(w * k ** 2)))
    return num / den if den > 0 else 0.0


def stability_constant(op: LinearizedOperator, norms: WeightedNorms) -> float:
    """Bound on ||phi||_* / ||h||_** for the discrete solution map.

    Row sums of ``D S D^{-1}`` over t >= 0 and over t <= 0 are added, mirroring
    the two-part norm.
    """
    S = op.solution_map()[:op.grid.size]
    t = op.grid.nodes
    D = norms.weights(t)
    rows = np.abs(D[:, None] * S / D[None, :]).sum(axis=1)
    return float(rows[t >= 0].max() + rows[t <= 0].max())


def solve_linearized(op: LinearizedOperator, h, norms: WeightedNorms, tol: float = ORTHO_TOL) -> LinearSolution:
    """Solve L_m psi = h~ with decaying tails, gauge <psi, kernel> = 0.

    For mode 1 below the translation threshold the load must be orthogonal to
    w' in the volume inner product; otherwise :class:`SolvabilityError`.
    """
    ht = _load(op, h)
    cos = orthogonality(op, ht) if op.mode == 1 else float("nan")
    removed = 0.0
    if op.needs_orthogonality:
        if abs(cos) > tol:
            raise SolvabilityError(
                f"load is not orthogonal to the translation kernel (cosine {cos:.3g}); "
                f"below p = {op.params.translation_threshold:.6g} mode 1 is solvable only on the complement of w'")
        # the discrete range misses the volume-orthogonal complement by O(h^k); project onto it
        y = op.cokernel()
        c = float(y @ ht)
        removed = abs(c) / max(float(np.linalg.norm(ht)), 1e-300)
        ht = ht - c * y
    x = linalg.lstsq(op.stacked(), np.concatenate([ht, [0.0]]), lapack_driver="gelsd")[0]
    res = float(np.max(np.abs(op.apply(x) - ht)) / max(np.max(np.abs(ht)), 1e-300))
    g = op.grid
    psi = x[:g.size]
    psi_f = GridFunction(g, psi, *op.tails(x))
    t = g.nodes
    ps, hs = norms.star_cyl(t, psi), norms.star_star_cyl(t, ht)
    return LinearSolution(op.params, op.mode, psi_f, ps, hs, ps / hs, stability_constant(op, norms), res, cos,
                          removed)


@dataclass(frozen=True)
class SingularReport:
    sigma_min: float  # smallest singular value of the map, relative to the largest
    sigma_next: float  # smallest one on the complement of the numerical kernel
    kernel_overlap: float  # |cos| between the minimizing direction and the kernel function


def singular_report(op: LinearizedOperator) -> SingularReport:
    """Singular values of L_m on functions bounded at both ends (no gauge row).

    The domain includes the free far-field amplitude, so with two bounded
    far-field behaviors the map has one more column than rows and its
    smallest singular value is zero.
    """
    A = op.stacked()[:-1]
    U, S, Vt = linalg.svd(A, full_matrices=True)
    sv = np.zeros(A.shape[1])
    sv[:len(S)] = S
    v = Vt[-1][:op.grid.size]
    k = op.kernel
    return SingularReport(float(sv[-1] / sv[0]), float(sv[-2] / sv[0]),
                          float(abs(v @ k) / (np.linalg.norm(v) * np.linalg.norm(k))))


@dataclass(frozen=True)
class DecayReport:
    far_exponent: float  # physical exponent of phi as r -> inf
    near_exponent: float  # physical exponent of phi as r -> 0
    predicted_far: float
    predicted_near: float
    far_rel_error: float
    near_rel_error: float
    weighted_interior_max: float  # sup_{r<=1} r^sigma |phi|

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def decay_fit(psi: GridFunction, params: ProblemParams, report, norms: WeightedNorms | None = None,
              span: float = 2 * FIT_SPAN) -> DecayReport:
    """Log-slopes of phi at both ends against the indicial exponents of ``report``.

    The far prediction is the slowest decaying exponent (real part for a
    complex pair); the near prediction is the regular root at the origin.
    """
    t = psi.grid.nodes
    tau0 = params.tau0
    far = t <= t[0] + span
    near = t >= t[-1] - span
    k_far = _log_slope(t, psi.values, far)
    k_near = -_log_slope(t, psi.values, near)
    far_exp = -tau0 - k_far
    near_exp = k_near - tau0
    roots = report.roots_at_infinity
    if report.complex_at_infinity:
        pred_far = roots[0]
    else:
        pred_far = max(g for g in roots if tau0 + g < 0) if any(tau0 + g < 0 for g in roots) else max(roots)
    pred_near = float(report.roots_at_zero[0])
    norms = norms or WeightedNorms(params)
    pos = t >= 0
    wmax = float(np.max(np.exp((tau0 - norms.sigma) * t[pos]) * np.abs(psi.values[pos])))
    return DecayReport(far_exp, near_exp, pred_far, pred_near,
                       abs(far_exp - pred_far) / abs(pred_far),
                       abs(near_exp - pred_near) / max(abs(pred_near), 1.0), wmax)
