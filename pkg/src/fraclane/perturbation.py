"""Bound states of (-Delta)^s u + V u = u^p near the scaled entire solution.

Writing ``u(y) = lambda^{tau0} (w + phi)(lambda y)`` turns the problem into

    (-Delta)^s phi + V_lambda phi - p w^{p-1} phi = N(phi) - V_lambda w,
    V_lambda(x) = lambda^{-2s} V(x / lambda),
    N(phi) = (w + phi)^p - w^p - p w^{p-1} phi,

solved by fixed-point iteration on the radial (mode-0) cylinder
discretization.  On functions bounded at both ends the linear operator keeps
a one-dimensional kernel (the solutions form a continuum), so each linear
solve carries a gauge: ``phi`` vanishes at the peak of the dilation kernel
``z0``.  Pinning where ``z0`` is largest removes the kernel direction with the
best conditioning; pinning near the origin or far out makes the iteration
diverge for the larger lambda values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .cylinder import CylinderGrid, GridFunction, KernelTable, Tail
from .entire import EntireSolution, PreconditionError, entire_system, origin_amplitude
from .linearized import PotentialProfile, WeightedNorms, assemble
from .params import ProblemParams, compute_constants

FIXED_POINT_TOL = 1e-9
MAX_ITER = 200
DECAY_CHECK_MAX = 1e6
DECAY_CHECK_LEVEL = 1e-2
NORMALIZATION_TOL = 1e-6


class InvalidPotential(ValueError):
    pass


class LambdaTooLarge(ArithmeticError):
    """The iteration left the contraction ball."""


@dataclass(frozen=True)
class PotentialSpec:
    """Radial potential from a built-in family.

    ``powerTail``: ``amp (1 + r^2)^{-mu/2}`` with ``mu > 2s``.
    ``compactBump``: ``amp exp(1 - 1/(1 - (r/R)^2))`` for ``r < R``, else 0.
    """
    family: str
    amp: float = 1.0
    mu: float = 1.5
    radius: float = 1.0

    def __post_init__(self):
        if self.family not in ("powerTail", "compactBump", "zero"):
            raise InvalidPotential(f"unknown potential family {self.family!r}")
        if self.amp < 0 or not math.isfinite(self.amp):
            raise InvalidPotential("amplitude must be finite and non-negative")
        if self.family == "compactBump" and self.radius <= 0:
            raise InvalidPotential("bump radius must be positive")

    @classmethod
    def power_tail(cls, mu: float, amp: float = 1.0):
        return cls("powerTail", amp=amp, mu=mu)

    @classmethod
    def compact_bump(cls, radius: float = 1.0, amp: float = 1.0):
        return cls("compactBump", amp=amp, radius=radius)

    @classmethod
    def zero(cls):
        return cls("zero", amp=0.0)

    def __call__(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.family == "powerTail":
            return self.amp * (1.0 + r * r) ** (-0.5 * self.mu)
        if self.family == "compactBump":
            q = (r / self.radius) ** 2
            out = np.zeros_like(r)
            inside = q < 1
            out[inside] = self.amp * np.exp(1.0 - 1.0 / (1.0 - q[inside]))
            return out
        return np.zeros_like(r)

    @property
    def sup(self) -> float:
        return float(self.amp)  # every family peaks at r = 0

    def weighted(self, rho, s) -> np.ndarray:
        """rho^{2s} V(rho), the potential in cylinder units."""
        rho = np.asarray(rho, dtype=float)
        return rho ** (2 * s) * self(rho)

    def decay_profile(self, s, r_max: float = DECAY_CHECK_MAX, points: int = 2001):
        """(r, a(r)) with a(r) = sup_{|x| >= r} |x|^{2s} V(x) on a log grid."""
        r = np.geomspace(1e-3, r_max, points)
        g = self.weighted(r, s)
        a = np.maximum.accumulate(g[::-1])[::-1]
        return r, a

    def check(self, s):
        """Enforce V >= 0 bounded and a(r) -> 0; returns a(r_max)."""
        if self.family == "powerTail" and not self.mu > 2 * s:
            raise InvalidPotential(f"powerTail needs mu > 2s = {2 * s:g}")
        r, a = self.decay_profile(s)
        if np.any(self(r) < 0):
            raise InvalidPotential("potential must be non-negative")
        peak = max(float(a[0]), 1e-300)
        if a[-1] > DECAY_CHECK_LEVEL * peak and a[-1] > 0:
            raise InvalidPotential(f"|x|^2s V does not decay: a({r[-1]:.0e}) = {a[-1]:.3g}")
        return float(a[-1])


@dataclass(frozen=True)
class ScaledPotential:
    """V_lambda in cylinder units: ``r^{2s} V_lambda(r) = rho^{2s} V(rho)``, ``rho = r / lambda``."""
    spec: PotentialSpec
    lam: float
    s: float
    values: GridFunction

    def physical(self, r) -> np.ndarray:
        return self.lam ** (-2 * self.s) * self.spec(np.asarray(r, dtype=float) / self.lam)

    @property
    def sup(self) -> float:
        return self.lam ** (-2 * self.s) * self.spec.sup


def scale_potential(spec: PotentialSpec, lam: float, grid: CylinderGrid, s: float) -> ScaledPotential:
    if not 0 < lam <= 1:
        raise ValueError("lambda must lie in (0, 1]")
    t = grid.nodes
    vals = spec.weighted(np.exp(-t) / lam, s)
    # near the origin rho^{2s} V(0); far out the family's own decay
    right = Tail(0.0, 2 * s, float(vals[-1]))
    if spec.family == "powerTail":
        left = Tail(0.0, spec.mu - 2 * s, float(vals[0]))
    else:
        left = Tail(float(vals[0]))
    return ScaledPotential(spec, lam, s, GridFunction(grid, vals, left, right))


def forcing_norm(sol: EntireSolution, Vl: ScaledPotential, norms: WeightedNorms) -> float:
    """||V_lambda w||_**."""
    g = sol.grid
    return norms.star_star_cyl(g.nodes, Vl.values.values * sol.v.values)


@dataclass(frozen=True)
class BoundState:
    params: ProblemParams
    lam: float
    eta: GridFunction  # r^{tau0} phi
    phi_star: float
    u_sup: float
    rho: float
    iterations: int
    updates: list = field(repr=False)
    residual: float  # full nonlinear residual relative to sup u^p
    reconstruction: dict = field(default_factory=dict)

    @property
    def contraction_ratios(self) -> list:
        u = self.updates
        return [u[i + 1] / u[i] for i in range(len(u) - 1) if u[i] > 0]

    def u(self, y, sol: EntireSolution) -> np.ndarray:
        """u_lambda(y) = lambda^{tau0} (w + phi)(lambda y)."""
        tau0 = self.params.tau0
        r = self.lam * np.asarray(y, dtype=float)
        t = -np.log(r)
        return self.lam ** tau0 * r ** (-tau0) * (sol.v(t) + self.eta(t))


def _nonlinear(v, eta, p):
    # positive part keeps intermediate iterates admissible for any real p
    return np.maximum(v + eta, 0.0) ** p - v ** p - p * v ** (p - 1) * eta


def fixed_point(params: ProblemParams, table: KernelTable, sol: EntireSolution, pot: PotentialProfile,
                Vl: ScaledPotential, norms: WeightedNorms, rho: float | None = None,
                tol: float = FIXED_POINT_TOL, max_iter: int = MAX_ITER) -> BoundState:
    """phi_{k+1} = T_lambda(N(phi_k) - V_lambda w), pinned at the kernel peak.

    ``rho`` defaults to ``0.1 min(1, v_inf)``; an iterate with ``||phi||_* >= rho``
    raises :class:`LambdaTooLarge`.
    """
    if table.mode != 0:
        raise ValueError("radial problem: mode-0 table required")
    consts = compute_constants(params)
    p, tau0 = params.p, params.tau0
    vinf = consts.beta ** (1.0 / (p - 1))
    rho = 0.1 * min(1.0, vinf) if rho is None else rho
    if abs(origin_amplitude(sol.v, tau0) - 1.0) > NORMALIZATION_TOL:
        raise PreconditionError("the entire solution must satisfy w(0) = 1; see entire.normalize_origin")
    grid = sol.grid
    N = grid.size
    op = assemble(sol, pot, table, consts)
    Vt = Vl.values.values
    A = op.stacked()
    A[:N, :N] += np.diag(Vt)
    pin = int(np.argmax(np.abs(op.kernel)))
    A[N, :] = 0.0
    A[N, pin] = 1.0
    if A.shape[1] != N + 1:
        raise ArithmeticError("expected two bounded far-field behaviors for mode 0")
    lu = linalg.lu_factor(A)
    v = sol.v.values
    forcing = -Vt * v
    t = grid.nodes

    def T(rhs):
        return linalg.lu_solve(lu, np.concatenate([rhs, [0.0]]))

    x = np.zeros(N + 1)
    updates = []
    it = 0
    while True:
        eta = x[:N]
        with np.errstate(over="ignore", invalid="ignore"):
            rhs = _nonlinear(v, eta, p) + forcing
        if not np.all(np.isfinite(rhs)):
            raise LambdaTooLarge(f"fixed-point iteration diverged at lambda={Vl.lam}; try a smaller lambda")
        new = T(rhs)
        star = norms.star_cyl(t, new[:N])
        if star >= rho:
            raise LambdaTooLarge(
                f"iterate left the contraction ball (||phi||_* = {star:.3g} >= rho = {rho:.3g}) "
                f"at lambda={Vl.lam}; try a smaller lambda")
        upd = norms.star_cyl(t, new[:N] - eta)
        updates.append(upd)
        x = new
        it += 1
        if upd <= tol * max(star, 1e-300) or upd == 0.0:
            break
        if it >= max_iter:
            raise ArithmeticError(f"fixed point did not settle in {max_iter} iterations")
    eta = x[:N]
    sysm = entire_system(params, table, grid, consts)
    amp_v = sol.v.left.amp2
    U = v + eta
    R = sysm.apply(U, amp_v + x[N]) + Vt * U - U ** p
    # in cylinder units both sides carry the factor r^{tau0+2s}
    res = float(np.max(np.abs(R)) / np.max(U ** p))
    L, Rt = op.tails(x)
    eta_f = GridFunction(grid, eta, L, Rt)
    Uphys = np.exp(tau0 * t) * U
    u_sup = Vl.lam ** tau0 * float(np.max(Uphys))
    rec = {"formula": "u(y) = lambda^tau0 (w + phi)(lambda y)", "amplitude": Vl.lam ** tau0,
           "argument_scale": Vl.lam, "tau0": tau0, "pin_radius": float(np.exp(-t[pin])),
           "u_at_origin": Vl.lam ** tau0 * float(Uphys[-1])}
    return BoundState(params, Vl.lam, eta_f, norms.star_cyl(t, eta), u_sup, rho, it, updates, res, rec)


@dataclass
class SweepResult:
    rows: list
    slope: float
    intercept: float

    @property
    def working_range(self):
        """(smallest, largest) lambda that produced a bound state, or None."""
        ok = [r["lambda"] for r in self.rows if not r["error"]]
        return (min(ok), max(ok)) if ok else None

    def columns(self):
        return ["lambda", "phiStarNorm", "uSupNorm", "iterations", "residual", "error"]


def lambda_sweep(params: ProblemParams, table: KernelTable, sol: EntireSolution, pot: PotentialProfile,
                 spec: PotentialSpec, lambdas, norms: WeightedNorms, **kwargs) -> SweepResult:
    """fixed_point at each lambda (decreasing); slope of log ||phi||_* against log lambda."""
    lambdas = [float(x) for x in lambdas]
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambdas must be strictly decreasing")
    spec.check(params.s)
    rows = []
    for lam in lambdas:
        Vl = scale_potential(spec, lam, sol.grid, params.s)
        try:
            bs = fixed_point(params, table, sol, pot, Vl, norms, **kwargs)
            rows.append({"lambda": lam, "phiStarNorm": bs.phi_star, "uSupNorm": bs.u_sup,
                         "iterations": bs.iterations, "residual": bs.residual, "error": "",
                         "forcing": forcing_norm(sol, Vl, norms), "state": bs})
        except (LambdaTooLarge, ArithmeticError) as exc:
            rows.append({"lambda": lam, "phiStarNorm": float("nan"), "uSupNorm": float("nan"),
                         "iterations": 0, "residual": float("nan"), "error": str(exc),
                         "forcing": forcing_norm(sol, Vl, norms), "state": None})
    ok = [r for r in rows if not r["error"] and r["phiStarNorm"] > 0]
    slope = intercept = float("nan")
    if len(ok) >= 2:
        slope, intercept = np.polyfit(np.log([r["lambda"] for r in ok]), np.log([r["phiStarNorm"] for r in ok]), 1)
    return SweepResult(rows, float(slope), float(intercept))
