"""The entire radial solution as a boundary-value problem on the cylinder.

Unknown: ``v(t) = r^{tau0} w(r)`` on ``[-T, T]``.  The equation
``P_0 v = v^p`` is closed by two tail models:

* ``t > T`` (near the origin): ``v = A e^{-tau0 t}``, ``A`` by continuity.
* ``t < -T`` (far field): ``v = v_inf + e^{rate (t+T)} (A cos + B sin)`` with
  ``v_inf = beta^{1/(p-1)}`` and the rate/frequency taken from the mode-0
  indicial roots at infinity (two real exponentials in the stable case).
  ``A`` is fixed by continuity, ``B`` is an extra unknown.

Both far-field modes decay while only the regular mode survives at the
origin, so the linearization has a one-dimensional bounded kernel at every
profile (at a solution it is the scaling direction).  Newton therefore solves
the (N x N+1) Jacobian system together with a gauge row that freezes ``v`` at
one node; the normalization ``w(0) = 1`` is applied
afterwards by the exact scaling (:func:`to_physical`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .cylinder import (CylinderGrid, GridFunction, KernelTable, Tail, TailRule, _tail_basis,
                       apply_operator, extended_matrix, operator_matrix)
from .params import (IndicialReport, ProblemParams, SpectralConstants, compute_constants,
                     indicial_roots)

NEWTON_TOL = 1e-8
MAX_NEWTON = 60
MAX_HALVINGS = 30
FIT_NOISE = 1e-9
MIN_FIT_NODES = 20


class SolverError(ArithmeticError):
    def __init__(self, msg, history=None):
        super().__init__(msg)
        self.history = list(history or [])


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class EntireSolution:
    params: ProblemParams
    v: GridFunction
    residual_norm: float
    fitted_limit: float
    fitted_decay: float
    iterations: int
    history: list = field(default_factory=list, compare=False)

    @property
    def grid(self) -> CylinderGrid:
        return self.v.grid


def far_field_rule(params: ProblemParams, consts: SpectralConstants, grid: CylinderGrid,
                   report: IndicialReport | None = None) -> TailRule:
    report = report or indicial_roots(params, consts, 0)
    vinf = consts.beta ** (1.0 / (params.p - 1))
    rate = report.decay_rate_at_infinity() - params.tau0
    if report.complex_at_infinity:
        return TailRule(limit=vinf, rate=rate, freq=report.roots_at_infinity[1])
    # both real exponents decay; the faster one enters as the second basis function
    fast = -min(report.roots_at_infinity) - params.tau0
    return TailRule(limit=vinf, rate=rate, rate2=fast)


def origin_rule(params: ProblemParams, grid: CylinderGrid, amplitude: float | None = None) -> TailRule:
    """Pure e^{-tau0 t} tail; amplitude from continuity unless given."""
    if amplitude is None:
        return TailRule(limit=0.0, rate=params.tau0)
    return TailRule(limit=0.0, rate=params.tau0, fixed_amp=amplitude * math.exp(-params.tau0 * grid.T))


def sigmoid_guess(params: ProblemParams, consts: SpectralConstants, grid: CylinderGrid) -> np.ndarray:
    """v_inf / (1 + e^{tau0 (t - t0)}) with t0 placing the half-height where e^{-tau0 t} = v_inf."""
    vinf = consts.beta ** (1.0 / (params.p - 1))
    t0 = -math.log(vinf) / params.tau0
    return vinf / (1.0 + np.exp(params.tau0 * (grid.nodes - t0)))


def _check_init(params, consts, init: GridFunction):
    v = init.values
    if np.any(v <= 0):
        raise PreconditionError("initial guess must be positive")
    # the right end must carry the e^{-tau0 t} decay, not a flat tail
    t = init.grid.nodes
    tail = slice(-max(init.grid.size // 10, 4), None)
    slope = np.polyfit(t[tail], np.log(v[tail]), 1)[0]
    if not slope < -0.5 * params.tau0:
        raise PreconditionError(
            f"initial guess must decay like e^(-tau0 t) on the right (slope {slope:.3g}, tau0 {params.tau0:.3g})")


@dataclass(frozen=True)
class EntireSystem:
    """``P_0 v = M v + f + B col`` for grid values ``v`` and the free far-field amplitude ``B``."""
    M: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    col: np.ndarray = field(repr=False)
    left: TailRule
    right: TailRule

    def apply(self, v, amp2) -> np.ndarray:
        return self.M @ v + self.f + amp2 * self.col


def entire_system(params: ProblemParams, table: KernelTable, grid: CylinderGrid,
                  consts: SpectralConstants | None = None) -> EntireSystem:
    consts = consts or compute_constants(params)
    left = far_field_rule(params, consts, grid)
    right = origin_rule(params, grid, amplitude=None)
    M, f = operator_matrix(table, grid, left, right)
    # amplitude of the second far-field behavior is an unknown of its own
    pad = table.pad
    _, b2 = _tail_basis(left.rate, left.freq, left.rate2, grid.h * np.arange(pad, 0, -1))
    col = extended_matrix(table, grid.size)[:, :pad] @ b2
    return EntireSystem(M, f, col, left, right)


def solve_entire(params: ProblemParams, table: KernelTable, init: GridFunction | np.ndarray,
                 consts: SpectralConstants | None = None, tol: float = NEWTON_TOL,
                 max_iter: int = MAX_NEWTON) -> EntireSolution:
    """Damped Newton for ``P_0 v - v^p = 0`` with the tail models above."""
    consts = consts or compute_constants(params)
    if table.mode != 0:
        raise ValueError("the entire solution lives on mode 0")
    if isinstance(init, GridFunction):
        grid = init.grid
    else:
        init = np.asarray(init, dtype=float)
        grid = CylinderGrid(0.5 * (init.size - 1) * table.h, table.h)
        init = GridFunction(grid, init, None, None)
    _check_init(params, consts, init)
    p = params.p
    system = entire_system(params, table, grid, consts)
    M, f, col, left, right = system.M, system.f, system.col, system.left, system.right
    N = grid.size

    def residual(x):
        v = x[:N]
        return M @ v + f + x[N] * col - v ** p

    v0 = init.values
    amp2 = 0.0
    if init.left is not None and init.left.rate == left.rate and init.left.freq == left.freq:
        amp2 = init.left.amp2
    x = np.concatenate([v0, [amp2]])
    # gauge: the node where the guess is closest to half the far-field limit keeps its value
    vinf = consts.beta ** (1.0 / (p - 1))
    gauge = int(np.argmin(np.abs(v0 - 0.5 * vinf)))
    row = np.zeros(N + 1)
    row[gauge] = 1.0
    r = residual(x)
    err = float(np.max(np.abs(r)))
    history = [err]
    it = 0
    while err > tol:
        if it >= max_iter:
            raise SolverError(f"Newton did not converge in {max_iter} steps (residual {err:.3g})", history)
        J = np.empty((N, N + 1))
        J[:, :N] = M - np.diag(p * x[:N] ** (p - 1))
        J[:, N] = col
        try:
            step = linalg.lstsq(np.vstack([J, row]), np.concatenate([-r, [0.0]]),
                                lapack_driver="gelsd", check_finite=True)[0]
        except (linalg.LinAlgError, ValueError) as exc:
            raise SolverError(f"linear solve failed: {exc}", history) from exc
        lam = 1.0
        for _ in range(MAX_HALVINGS):
            trial = x + lam * step
            if np.all(trial[:N] > 0):
                rt = residual(trial)
                et = float(np.max(np.abs(rt)))
                if et < (1 - 1e-4 * lam) * err or et <= tol:
                    break
            lam *= 0.5
        else:
            raise SolverError("line search failed (positivity or no decrease)", history)
        x, r, err = trial, rt, et
        history.append(err)
        it += 1
    v = x[:N]
    L = left.tail(v, grid.h)
    L = Tail(L.limit, L.rate, L.amp, float(x[N]), L.freq, L.rate2)
    sol_v = GridFunction(grid, v, L, right.tail(v[::-1], grid.h))
    fitted_limit, fitted_decay = _end_fits(params, sol_v)
    return EntireSolution(params, sol_v, err, fitted_limit, fitted_decay, it, history)


def _end_fits(params, v: GridFunction):
    """Extrapolated limit as t -> -inf and the log-slope as t -> +inf."""
    g = v.grid
    t = g.nodes
    tail = t >= g.T - 2.0
    decay = -np.polyfit(t[tail], np.log(v.values[tail]), 1)[0]
    win = t <= -g.T / 2
    limit = v.left.limit if v.left is not None else v.values[0]
    fit = _far_fit(params, v, fit_window(v, limit))
    if fit.get("ok"):
        limit = fit["limit"]
    return float(limit), float(decay)


def _far_fit(params, v: GridFunction, win, report: IndicialReport | None = None):
    t = v.grid.nodes[win]
    y = v.values[win]
    L = v.left
    osc = L.freq != 0.0
    if osc:
        def model(x, lim, A, sig, tau, ph):
            return lim + A * np.exp(sig * x) * np.cos(tau * x + ph)
        x0 = [L.limit, math.hypot(L.amp, L.amp2) * math.exp(L.rate * v.grid.T), L.rate, L.freq, 0.0]
        # start from the best phase on a coarse scan
        best = None
        for ph in np.linspace(0, 2 * math.pi, 12, endpoint=False):
            x0[4] = ph
            for sgn in (1.0, -1.0):
                try:
                    popt, _ = optimize.curve_fit(model, t, y, p0=[x0[0], sgn * x0[1], *x0[2:]], maxfev=20000)
                except RuntimeError:
                    continue
                res = float(np.sum((model(t, *popt) - y) ** 2))
                if best is None or res < best[0]:
                    best = (res, popt)
        if best is None:
            return {"ok": False, "limit": float(y[0])}
        lim, A, sig, tau, ph = best[1]
        return {"ok": True, "limit": lim, "amplitude": abs(A), "sigma": sig, "tau": abs(tau),
                "phase": ph, "rms": math.sqrt(best[0] / len(t))}

    def model(x, lim, A, sig):
        return lim + A * np.exp(sig * x)
    try:
        popt, _ = optimize.curve_fit(model, t, y, p0=[L.limit, L.amp * math.exp(L.rate * v.grid.T), L.rate],
                                     maxfev=20000)
    except RuntimeError:
        return {"ok": False, "limit": float(y[0])}
    res = float(np.sum((model(t, *popt) - y) ** 2))
    return {"ok": True, "limit": popt[0], "amplitude": popt[1], "sigma": popt[2], "tau": 0.0,
            "rms": math.sqrt(res / len(t))}


def count_oscillations(v: GridFunction, limit: float, window) -> int:
    """Sign changes of v - limit inside ``window``."""
    d = v.values[window] - limit
    return int(np.sum(np.signbit(d[1:]) != np.signbit(d[:-1])))


def fit_window(v: GridFunction, limit: float) -> np.ndarray:
    """Nodes in [-T, -T/2] where v - limit is above roundoff.

    When the far field has already decayed to roundoff there (fast real
    exponents), fall back to the stretch left of the point where
    ``|v - limit|`` first reaches 1e-3 of the limit.
    """
    g = v.grid
    t = g.nodes
    d = np.abs(v.values - limit)
    valid = d > FIT_NOISE * limit
    win = valid & (t <= -g.T / 2)
    if win.sum() >= MIN_FIT_NODES:
        return win
    big = np.nonzero(d >= 1e-3 * limit)[0]
    t_hi = t[big[0]] if len(big) else -g.T / 2
    return valid & (t <= t_hi)


def verify_asymptotics(sol: EntireSolution, consts: SpectralConstants,
                       report: IndicialReport | None = None) -> dict:
    """Fit the far field and compare with the indicial roots.

    ``sigma`` is the fitted exponent of ``v - v_inf`` in ``t``; the physical
    power of ``w - w_sing`` in ``r`` is ``-(sigma + tau0)``, reported as
    ``physical_rate`` next to the predicted ``predicted_rate``.
    """
    params = sol.params
    report = report or indicial_roots(params, consts, 0)
    vinf = consts.beta ** (1.0 / (params.p - 1))
    win = fit_window(sol.v, vinf)
    t = sol.grid.nodes[win]
    out = {
        "window": (float(t[0]), float(t[-1])) if len(t) else None,
        "fitted_limit": sol.fitted_limit,
        "predicted_limit": vinf,
        "limit_rel_error": abs(sol.fitted_limit / vinf - 1.0),
        "complex_roots": report.complex_at_infinity,
        "predicted_rate": report.decay_rate_at_infinity(),
        "predicted_freq": report.roots_at_infinity[1] if report.complex_at_infinity else 0.0,
        "sign_changes": count_oscillations(sol.v, vinf, win),
    }
    fit = _far_fit(params, sol.v, win, report) if len(t) >= MIN_FIT_NODES else {"ok": False}
    out["fit_ok"] = bool(fit.get("ok", False))
    if out["fit_ok"]:
        out.update(sigma=float(fit["sigma"]), tau=float(fit["tau"]),
                   physical_rate=float(fit["sigma"]) + params.tau0, rms=fit["rms"])
        out["rate_rel_error"] = abs(out["physical_rate"] / out["predicted_rate"] - 1.0)
        if report.complex_at_infinity:
            out["freq_rel_error"] = abs(out["tau"] / out["predicted_freq"] - 1.0)
    return out


def hamiltonian_limit(params: ProblemParams, consts: SpectralConstants) -> float:
    vinf = consts.beta ** (1.0 / (params.p - 1))
    return _h1(vinf, consts.beta, consts.ds, params.p)


def _h1(v, beta, ds, p):
    return (-0.5 * beta * v * v + v ** (p + 1) / (p + 1)) / ds


def hamiltonian_boundary(sol: EntireSolution, consts: SpectralConstants) -> GridFunction:
    """H1(t) = (1/d_s)(-(beta/2) v^2 + v^{p+1}/(p+1)) on the grid, with its two limits as tails."""
    p = sol.params.p
    vals = _h1(sol.v.values, consts.beta, consts.ds, p)
    lim = hamiltonian_limit(sol.params, consts)
    return GridFunction(sol.grid, vals, Tail(lim, 0.0, vals[0] - lim), Tail(0.0, 0.0, vals[-1]))


@dataclass(frozen=True)
class RadialProfile:
    r: np.ndarray
    w: np.ndarray
    tau0: float

    @property
    def scaled(self) -> np.ndarray:
        """r^{tau0} w(r)."""
        return self.r ** self.tau0 * self.w

    def __call__(self, r):
        """Log-log cubic interpolation."""
        from scipy.interpolate import CubicSpline
        cs = CubicSpline(np.log(self.r), np.log(self.w))
        return np.exp(cs(np.log(np.asarray(r, dtype=float))))


def origin_amplitude(v: GridFunction, tau0: float) -> float:
    """lim_{t -> inf} e^{tau0 t} v(t), read off the right tail."""
    R = v.right
    if R is None or R.limit != 0.0 or abs(R.rate - tau0) > 1e-12:
        t = v.grid.nodes[-1]
        return float(math.exp(tau0 * t) * v.values[-1])
    return float(R.amp * math.exp(tau0 * v.grid.T))


def to_physical(sol: EntireSolution, r=None, points_per_unit: int = 10) -> RadialProfile:
    """w(r) = r^{-tau0} v(-log r), rescaled by the exact symmetry so that w(0) = 1."""
    tau0 = sol.params.tau0
    g = sol.grid
    if r is None:
        r = np.exp(-np.linspace(-g.T, g.T, int(2 * g.T * points_per_unit) + 1))[::-1]
    r = np.asarray(r, dtype=float)
    A = origin_amplitude(sol.v, tau0)
    # w_mu(r) = mu^{tau0} w(mu r) has w_mu(0) = mu^{tau0} A; in t it is a shift by log(mu)
    shift = math.log(A) / tau0
    t = -np.log(r) + shift
    v = sol.v(t)
    # inside the window interpolate log v: it is nearly linear where v decays
    # exponentially, so the spline error does not break monotonicity of w
    from scipy.interpolate import CubicSpline
    mid = np.abs(t) <= g.T
    v[mid] = np.exp(CubicSpline(g.nodes, np.log(sol.v.values))(t[mid]))
    return RadialProfile(r, r ** (-tau0) * v, tau0)


def rescale_profile(v: GridFunction, mu: float, tau0: float) -> np.ndarray:
    """Samples of v(t - log mu), the cylinder form of w -> mu^{tau0} w(mu .)."""
    return v(v.grid.nodes - math.log(mu))


def normalize_origin(sol: EntireSolution, table: KernelTable, consts: SpectralConstants | None = None,
                     tol: float = NEWTON_TOL, amp_tol: float = 1e-9, max_passes: int = 4) -> EntireSolution:
    """Re-solve on the translate of ``sol`` with ``w(0) = 1``.

    The translate is interpolated onto the grid and polished by Newton, whose
    gauge node keeps the interpolated value; a few passes bring ``w(0)`` to 1.
    """
    tau0 = sol.params.tau0
    for _ in range(max_passes):
        A = origin_amplitude(sol.v, tau0)
        if abs(A - 1.0) <= amp_tol:
            return sol
        shifted = sol.v(sol.grid.nodes + math.log(A) / tau0)
        init = GridFunction(sol.grid, shifted, sol.v.left, None)
        sol = solve_entire(sol.params, table, init, consts, tol=tol)
    A = origin_amplitude(sol.v, tau0)
    if abs(A - 1.0) > amp_tol:
        raise SolverError(f"normalization stalled at w(0) = {A:.12g}")
    return sol
