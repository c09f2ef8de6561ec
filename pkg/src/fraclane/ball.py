"""Radial Dirichlet problem on the unit ball through its Green operator.

The ball Green function of (-Delta)^s is written as the Riesz potential minus
its exterior Poisson correction,

    G(x, y) = k' |x-y|^{2s-n} - int_{|z|>1} P(x, z) k' |z-y|^{2s-n} dz,

    k'      = Gamma(n/2 - s) / (4^s pi^{n/2} Gamma(s)),
    P(x, z) = c_P ((1-|x|^2)/(|z|^2-1))^s |x-z|^{-n},
    c_P     = Gamma(n/2) sin(pi s) / pi^{n/2+1}.

Averaging over the sphere turns every piece into a hypergeometric function:
the Riesz potential of a uniform shell is

    A(r, rho) = |S^{n-1}| M^{2s-n} 2F1((n-2s)/2, 1-s; n/2; (m/M)^2),

``M, m`` the larger/smaller radius, and the Poisson kernel averages to
``|S^{n-1}| zeta^{2-n} / (zeta^2 - r^2)``.  The exterior integral is a
one-dimensional quadrature in ``zeta`` that factorizes, so the whole operator
is a couple of matrix products.  Densities are piecewise linear in ``rho``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, linalg, special

from .gamma import log_gamma
from .harmonics import sphere_area
from .cylinder import CylinderGrid, GridFunction, Tail
from .params import ProblemParams

CELL_POINTS = 8
ZETA_POINTS = 8
FAR_POINTS = 24
ZETA_MIN = 1e-10
BAND = 3
GRADED_PANELS = 30
NEAR_GAP = 1e-11  # hyp2f1 loses 1 - z below this relative gap
PICARD_TOL = 1e-10
PICARD_MAX = 10_000
NEWTON_TOL = 1e-10  # absolute, well inside the 1e-9 acceptance


class GreenQuadratureError(ArithmeticError):
    pass


class DivergenceError(ArithmeticError):
    """Picard iteration blew up: lambda is beyond the minimal branch."""


class ContinuationError(ArithmeticError):
    def __init__(self, msg, last=None, branch=None):
        super().__init__(msg)
        self.last = last
        self.branch = branch or []


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class BallGrid:
    """Radial nodes 0 = r_0 < ... < r_N = 1.

    A geometric block resolves small radii (down to ``r_min``, where large
    solutions concentrate); the outer block ``(split, 1]`` is graded toward
    ``r = 1`` with exponent ``grading``.
    """
    N: int = 400
    grading: float = 2.0
    r_min: float = 1e-9
    split: float = 0.1
    log_fraction: float = 0.5

    def __post_init__(self):
        if self.N < 16:
            raise ValueError("need at least 16 intervals")
        if not 0 < self.r_min < self.split < 1:
            raise ValueError("need 0 < r_min < split < 1")
        if self.grading < 1:
            raise ValueError("grading exponent must be >= 1")

    @property
    def nodes(self) -> np.ndarray:
        n_log = int(round(self.log_fraction * self.N))
        n_out = self.N - n_log
        inner = np.geomspace(self.r_min, self.split, n_log)
        j = np.arange(1, n_out + 1)
        outer = 1.0 - (1.0 - self.split) * (1.0 - j / n_out) ** self.grading
        r = np.concatenate([[0.0], inner, outer])
        r[-1] = 1.0
        return r

    def refined(self) -> "BallGrid":
        return BallGrid(2 * self.N, self.grading, self.r_min, self.split, self.log_fraction)


def riesz_constant(n, s):
    return math.exp(log_gamma(0.5 * n - s) - log_gamma(s)) / (4.0 ** s * math.pi ** (0.5 * n))


def green_constant(n, s):
    """Prefactor of |x-y|^{2s-n} F(r0) in the closed-form ball Green function."""
    return math.exp(log_gamma(0.5 * n) - 2 * log_gamma(s)) / (4.0 ** s * math.pi ** (0.5 * n))


def torsion_constant(n, s):
    """gamma_{n,s} with (-Delta)^s [gamma (1-|x|^2)_+^s] = 1 in the ball."""
    return math.exp(log_gamma(0.5 * n) - log_gamma(1 + s) - log_gamma(0.5 * n + s)) / 4.0 ** s


def shell_potential(r, rho, n, s):
    """A(r, rho): integral over the unit sphere of |r e - rho theta|^{2s-n}."""
    r, rho = np.broadcast_arrays(np.asarray(r, float), np.asarray(rho, float))
    big = np.maximum(r, rho)
    small = np.minimum(r, rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(big > 0, (small / big) ** 2, 0.0)
        val = sphere_area(n - 1) * big ** (2 * s - n) * special.hyp2f1(0.5 * (n - 2 * s), 1 - s, 0.5 * n, z)
    return val


def green_closed_form(n, s, x, y):
    """G(x, y) from the incomplete-beta formula (used as an independent check)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    d2 = np.sum((x - y) ** 2, axis=-1)
    r0 = (1 - np.sum(x * x, axis=-1)) * (1 - np.sum(y * y, axis=-1)) / d2
    a, b = s, 0.5 * n - s
    F = special.beta(a, b) * special.betainc(a, b, r0 / (1 + r0))
    return green_constant(n, s) * d2 ** (s - 0.5 * n) * F


def _zeta_rule(s):
    """Nodes x = zeta - 1 and weights for int_1^inf f(zeta) (zeta^2-1)^{-s} dzeta.

    Returned weights already contain (zeta^2 - 1)^{-s}.
    """
    gx, gw = np.polynomial.legendre.leggauss(ZETA_POINTS)
    xs, ws = [], []
    # innermost panel: Gauss-Jacobi for the x^{-s} endpoint behavior
    jx, jw = special.roots_jacobi(ZETA_POINTS, 0.0, -s)
    a = ZETA_MIN
    x = 0.5 * a * (jx + 1)
    xs.append(x)
    ws.append(jw * (0.5 * a) ** (1 - s) * (2 + x) ** (-s))
    while a < 1.0:
        b = min(2 * a, 1.0)
        x = a + 0.5 * (b - a) * (gx + 1)
        xs.append(x)
        ws.append(0.5 * (b - a) * gw * (x * (2 + x)) ** (-s))
        a = b
    # zeta in [2, inf): zeta = 2 / y
    fx, fw = np.polynomial.legendre.leggauss(FAR_POINTS)
    y = 0.5 * (fx + 1)
    zeta = 2.0 / y
    xs.append(zeta - 1)
    ws.append(0.5 * fw * 2.0 / y ** 2 * (zeta * zeta - 1) ** (-s))
    return np.concatenate(xs), np.concatenate(ws)


_GL_CELL = np.polynomial.legendre.leggauss(CELL_POINTS)


def _graded_rule(width, delta, s):
    """Points in [delta, width] clustered at 0 with weights for a cell whose
    integrand behaves like x^{2s-1} at x = 0.

    The piece [0, delta] is folded into the point x = delta with weight
    delta / 2s (exact for the leading power).
    """
    gx, gw = _GL_CELL
    pts, wts = [np.array([delta])], [np.array([delta / (2 * s)])]
    a = delta
    while a < width * (1 - 1e-12):
        b = min(2 * a, width)
        pts.append(a + 0.5 * (b - a) * (gx + 1))
        wts.append(0.5 * (b - a) * gw)
        a = b
    return np.concatenate(pts), np.concatenate(wts)


@dataclass(frozen=True)
class RadialGreenOperator:
    """Matrix W with (G f)(r_k) = sum_l W[k, l] f(r_l) for piecewise-linear f."""
    params: ProblemParams
    grid: BallGrid
    nodes: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    kappa: float
    kappa_analytic: float
    torsion_ratio: float

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def apply(self, f) -> np.ndarray:
        return self.W @ np.asarray(f, dtype=float)

    def torsion(self) -> np.ndarray:
        return self.apply(np.ones(self.n_nodes))


def build_green(params: ProblemParams, grid: BallGrid, calibrate: bool = True) -> RadialGreenOperator:
    """Assemble the radial Green matrix.

    With ``calibrate`` the Riesz constant is fixed by matching the torsion
    value at the origin to gamma_{n,s}; the ratio to the closed-form constant
    is kept in ``torsion_ratio`` (1 up to quadrature error).
    """
    n, s = params.n, params.s
    r = grid.nodes
    nn = len(r)
    gx, gw = np.polynomial.legendre.leggauss(CELL_POINTS)
    lo, hi = r[:-1], r[1:]
    width = hi - lo
    xi = 0.5 * (gx + 1)
    rho = lo[:, None] + width[:, None] * xi[None, :]  # (cells, Q)
    wq = 0.5 * width[:, None] * gw[None, :] * rho ** (n - 1)
    hat_lo = 1 - xi  # weight of the left node of the cell
    hat_hi = xi

    # Riesz part at regular points
    R = shell_potential(r[:, None, None], rho[None], n, s)  # (nodes, cells, Q)

    # exterior Poisson correction
    zx, zw = _zeta_rule(s)
    zeta = 1.0 + zx
    one_minus = (1 - r) * (1 + r)
    B = zw[None, :] * zeta[None, :] / ((zx[None, :] + (1 - r)[:, None]) * (zeta[None, :] + r[:, None]))
    C = shell_potential(zeta[:, None], rho.ravel()[None, :], n, s)
    cP = math.exp(log_gamma(0.5 * n)) * math.sin(math.pi * s) / math.pi ** (0.5 * n + 1)
    Pc = cP * sphere_area(n - 1) * (np.maximum(one_minus, 0.0) ** s)[:, None] * (B @ C)
    Pc = Pc.reshape(R.shape)

    # near-diagonal cells: replace the Riesz quadrature by graded rules
    cells = np.arange(nn - 1)
    band = np.abs(cells[None, :] - np.arange(nn)[:, None] + 0.5) <= BAND
    R = np.where(band[..., None], 0.0, R)
    Wlo = np.einsum("kcq,cq,q->kc", R - Pc, wq, hat_lo)
    Whi = np.einsum("kcq,cq,q->kc", R - Pc, wq, hat_hi)
    kk, cc = np.nonzero(band)
    for k, c in zip(kk, cc):
        a, b = lo[c], hi[c]
        near_left = abs(r[k] - a) <= abs(r[k] - b)
        delta = max((b - a) * 2.0 ** (-GRADED_PANELS), NEAR_GAP * r[k])
        px, pw = _graded_rule(b - a, delta, s)
        pts = a + px if near_left else b - px
        vals = shell_potential(r[k], pts, n, s) * pts ** (n - 1) * pw
        frac = (pts - a) / (b - a)
        Wlo[k, c] += vals @ (1 - frac)
        Whi[k, c] += vals @ frac
    W = np.zeros((nn, nn))
    W[:, :-1] += Wlo
    W[:, 1:] += Whi
    kap = riesz_constant(n, s)
    W *= kap
    W[-1, :] = 0.0  # G vanishes on the boundary
    if not np.all(np.isfinite(W)):
        k, l = np.argwhere(~np.isfinite(W))[0]
        raise GreenQuadratureError(f"non-finite Green weight at r={r[k]}, rho={r[l]}")
    gam = torsion_constant(n, s)
    ratio = float(W[0].sum() / gam)
    if calibrate:
        W /= ratio
    neg = W < 0
    if np.any(neg):
        # tiny negative values come from cancellation next to r = 1
        if np.min(W) < -1e-10 * np.max(W):
            k, l = np.argwhere(W == W.min())[0]
            raise GreenQuadratureError(f"negative Green weight {W.min():.3g} at r={r[k]}, rho={r[l]}")
        W[neg] = 0.0
    return RadialGreenOperator(params, grid, r, W, kap / ratio if calibrate else kap, kap, ratio)


# ----------------------------------------------------------------------------
# branch of the Dirichlet problem  w = lambda G[(1 + w)^p]


@dataclass(frozen=True)
class BranchState:
    lam: float
    w: np.ndarray = field(repr=False)
    sup_norm: float
    arc_length: float = 0.0
    dlam_ds: float = float("nan")
    residual: float = 0.0


def _residual(op, w, lam):
    p = op.params.p
    return w - lam * op.apply((1 + w) ** p)


def minimal_branch(op: RadialGreenOperator, lam: float, ceiling: float = 1e3,
                   tol: float = PICARD_TOL, max_iter: int = PICARD_MAX, record: bool = False):
    """Picard iteration w <- lambda G[(1+w)^p] from w = 0.

    Returns the :class:`BranchState`; with ``record`` also the list of iterates.
    """
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    p = op.params.p
    w = np.zeros(op.n_nodes)
    its = [w]
    for _ in range(max_iter):
        new = lam * op.apply((1 + w) ** p)
        if not np.all(np.isfinite(new)) or new.max() > ceiling:
            raise DivergenceError(f"Picard iterates exceed {ceiling:g} at lambda={lam}: beyond the minimal branch")
        upd = np.max(np.abs(new - w))
        w = new
        if record:
            its.append(w)
        if upd <= tol * max(np.max(np.abs(w)), 1e-300) or upd == 0.0:
            break
    else:
        raise DivergenceError(f"Picard did not settle in {max_iter} iterations at lambda={lam}")
    st = BranchState(lam, w, float(w[0]), residual=float(np.max(np.abs(_residual(op, w, lam)))))
    return (st, its) if record else st


def _newton(op, w, lam, tangent, anchor, ds, metric, tol=NEWTON_TOL, max_iter=12):
    """Corrector for F(w, lam) = 0 plus the pseudo-arclength condition."""
    p = op.params.p
    W = op.W
    N = len(w)
    tw, tl = tangent
    aw, al = anchor
    for it in range(max_iter):
        g = (1 + w) ** p
        F = w - lam * (W @ g)
        arc = metric * (tw @ (w - aw)) + tl * (lam - al) - ds
        err = max(float(np.max(np.abs(F))), abs(arc))
        # roundoff floor of lambda W (1+w)^p
        floor = 1e-14 * lam * float(np.max(np.abs(W) @ g))
        if err <= max(tol, floor):
            return w, lam, it, err
        J = np.empty((N + 1, N + 1))
        J[:N, :N] = np.eye(N) - lam * W * (p * (1 + w) ** (p - 1))[None, :]
        J[:N, N] = -(W @ g)
        J[N, :N] = metric * tw
        J[N, N] = tl
        try:
            d = linalg.solve(J, -np.concatenate([F, [arc]]))
        except linalg.LinAlgError:
            return None
        w = w + d[:N]
        lam = lam + d[N]
        if not np.all(np.isfinite(w)):
            return None
    return None


def _tangent(op, w, lam, prev, metric):
    p = op.params.p
    W = op.W
    N = len(w)
    g = (1 + w) ** p
    J = np.empty((N + 1, N + 1))
    J[:N, :N] = np.eye(N) - lam * W * (p * (1 + w) ** (p - 1))[None, :]
    J[:N, N] = -(W @ g)
    J[N, :N] = metric * prev[0]
    J[N, N] = prev[1]
    rhs = np.zeros(N + 1)
    rhs[N] = 1.0
    d = linalg.solve(J, rhs)
    tw, tl = d[:N], d[N]
    nrm = math.sqrt(metric * (tw @ tw) + tl * tl)
    return tw / nrm, tl / nrm


@dataclass
class BranchResult:
    states: list
    folds: list  # (lambda at the fold from the quadratic fit, index of the bracketing state)
    lambda_star: float

    @property
    def fold_count(self) -> int:
        return len(self.folds)


def _fold_fit(states, i):
    """Quadratic lambda(s) through states i-1, i, i+1; returns the extremal lambda."""
    s = np.array([states[j].arc_length for j in (i - 1, i, i + 1)])
    lam = np.array([states[j].lam for j in (i - 1, i, i + 1)])
    c2, c1, c0 = np.polyfit(s - s[1], lam, 2)
    if c2 == 0:
        return float(lam.max())
    sv = -c1 / (2 * c2)
    if abs(sv) > abs(s[2] - s[0]):
        return float(lam.max() if c2 < 0 else lam.min())
    return float(c0 - c1 * c1 / (4 * c2))


def continue_branch(op: RadialGreenOperator, start: BranchState, target_sup: float = 1e3,
                    ds0: float = 0.05, ds_min: float = 1e-7, ds_max: float = 0.3,
                    max_steps: int = 5000) -> BranchResult:
    """Pseudo-arclength continuation until ``sup_norm >= target_sup``.

    Arclength is measured in the scaled variables (w / (1 + |w|_inf), lambda / lambda_0)
    so the steps stay relative while the solution grows by orders of magnitude.
    """
    N = op.n_nodes
    w, lam = start.w.copy(), start.lam
    lam0 = max(lam, 1e-3)
    states = [BranchState(lam, w, float(w[0]), 0.0)]
    # initial tangent: increasing lambda
    prev = (np.zeros(N), 1.0)
    metric = 1.0 / (N * (1 + np.max(np.abs(w))) ** 2)
    tw, tl = _tangent(op, w, lam, prev, metric)
    if tl < 0:
        tw, tl = -tw, -tl
    ds = ds0 * lam0
    s_tot = 0.0
    folds = []
    steps = 0
    while states[-1].sup_norm < target_sup:
        steps += 1
        if steps > max_steps:
            raise ContinuationError("step budget exhausted", states[-1], states)
        metric = 1.0 / (N * (1 + np.max(np.abs(w))) ** 2)
        pred_w = w + ds * tw
        pred_l = lam + ds * tl
        out = _newton(op, pred_w, pred_l, (tw, tl), (w, lam), ds, metric)
        if out is None or out[1] <= 0 or np.any(out[0] < -1e-12):
            ds *= 0.5
            if ds < ds_min * lam0:
                raise ContinuationError(f"Newton failed at minimum step near lambda={lam:.6g}", states[-1], states)
            continue
        w_new, lam_new, its, err = out
        ntw, ntl = _tangent(op, w_new, lam_new, (tw, tl), metric)
        if metric * (ntw @ tw) + ntl * tl < 0:
            ntw, ntl = -ntw, -ntl
        s_tot += ds
        st = BranchState(lam_new, w_new, float(w_new[0]), s_tot, ntl,
                         float(np.max(np.abs(_residual(op, w_new, lam_new)))))
        if tl * ntl < 0 and len(states) >= 1:
            folds.append(len(states))
        states.append(st)
        w, lam, tw, tl = w_new, lam_new, ntw, ntl
        if its <= 3:
            ds = min(ds * 1.5, ds_max * lam0)
        elif its >= 7:
            ds *= 0.5
    fold_info = []
    for i in folds:
        # sign change of dlam/ds between states i-1 and i: fit around the extremal one
        j = i - 1 if abs(states[i - 1].dlam_ds) < abs(states[i].dlam_ds) else i
        j = min(max(j, 1), len(states) - 2)
        fold_info.append((_fold_fit(states, j), i))
    lam_star = fold_info[0][0] if fold_info else float("nan")
    return BranchResult(states, fold_info, lam_star)


# ----------------------------------------------------------------------------
# blow-up rescaling


BALL_CUT = 0.1  # beyond this ball radius the Dirichlet boundary is visible


@dataclass(frozen=True)
class BlowUpProfile:
    """Rescaled large branch solution as a cylinder function.

    ``v`` holds ``r^{tau0} W(r)`` at ``t = -log r``.  Beyond the radius ``y_cut``
    (ball radius ``BALL_CUT``) the profile is continued flat; past the smallest
    resolved radius it follows the smooth-origin tail ``e^{-tau0 t}``.
    """
    params: ProblemParams
    v: GridFunction
    y: np.ndarray = field(repr=False)
    W: np.ndarray = field(repr=False)
    y_cut: float
    scale_R: float
    lam: float
    sup_norm: float
    mu: float
    variant: str
    value_at_zero_before: float

    def __call__(self, y):
        """W at physical radii ``y`` from the ball samples (monotone interpolation)."""
        y = np.asarray(y, dtype=float)
        pos = self.y > 0
        f = interpolate.PchipInterpolator(np.log(self.y[pos]), self.W[pos], extrapolate=False)
        out = np.empty_like(y)
        small = y < self.y[pos][0]
        out[~small] = f(np.log(y[~small]))
        # linear in y between the origin node and the first positive node
        out[small] = np.interp(y[small], self.y[:2], self.W[:2])
        return out

    @property
    def metadata(self) -> dict:
        return {"variant": self.variant, "lambda": self.lam, "sup_norm": self.sup_norm,
                "R": self.scale_R, "mu": self.mu, "W0_before_normalization": self.value_at_zero_before,
                "y_cut": self.y_cut}


def blow_up_rescale(params: ProblemParams, state: BranchState, nodes: np.ndarray,
                    grid: CylinderGrid | None = None, variant: str = "scaled",
                    min_sup: float = 1e2) -> BlowUpProfile:
    """Zoom into a large branch solution to approximate the entire solution.

    ``variant="scaled"``: ``W(y) = lambda^{1/(p-1)} m^{-1} w(y / R)``, ``R = m^{(p-1)/2s}``.
    ``variant="shifted"``: the same with ``1 + w`` and ``1 + m`` in place of
    ``w`` and ``m``; ``lambda^{1/(p-1)} (1 + w)`` solves the equation exactly in
    the ball, so this variant has no ``O(1/m)`` defect in the core.
    Either way a final exact scaling ``W -> mu^{tau0} W(mu .)`` sets ``W(0) = 1``.
    """
    if state.sup_norm < min_sup:
        raise PreconditionError(f"sup-norm {state.sup_norm:.3g} below {min_sup:g}; continue the branch further")
    p, s, tau0 = params.p, params.s, params.tau0
    lam, m = state.lam, state.sup_norm
    nodes = np.asarray(nodes, dtype=float)
    if variant == "scaled":
        base, vals = m, state.w
    elif variant == "shifted":
        base, vals = 1 + m, 1 + state.w
    else:
        raise ValueError("variant must be 'scaled' or 'shifted'")
    R = base ** ((p - 1) / (2 * s))
    amp = lam ** (1 / (p - 1))
    W0 = amp * vals[0] / base
    mu = W0 ** (-1.0 / tau0)  # mu^{tau0} W0 = 1
    y = nodes * R / mu
    W = mu ** tau0 * amp * vals / base
    keep = nodes <= BALL_CUT
    prof = BlowUpProfile(params, None, y[keep], W[keep], BALL_CUT * R / mu, R, lam, m, mu, variant, W0)
    grid = grid or CylinderGrid()
    t = grid.nodes
    t_cut = -math.log(prof.y_cut)
    vals_t = np.exp(-tau0 * np.maximum(t, t_cut)) * prof(np.exp(-np.maximum(t, t_cut)))
    left = Tail(float(vals_t[0]))
    right = Tail(0.0, tau0, float(vals_t[-1]))
    object.__setattr__(prof, "v", GridFunction(grid, vals_t, left, right))
    return prof
