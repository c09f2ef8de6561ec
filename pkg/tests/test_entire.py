"""Entire solution on the cylinder: Newton solve, asymptotics, H1, physical profile."""

import math

import numpy as np
import pytest

from fraclane import entire
from fraclane.cylinder import CylinderGrid, GridFunction, Tail, calibrate
from fraclane.params import ProblemParams, compute_constants


def test_residual_and_positivity(sol):
    assert sol.residual_norm <= 1e-8
    assert np.all(sol.v.values > 0)


def test_fitted_limit(sol, ref_consts):
    vinf = math.sqrt(0.5)
    assert ref_consts.beta ** 0.5 == pytest.approx(vinf, rel=1e-12)
    assert abs(sol.fitted_limit / vinf - 1) <= 1e-2


def test_fitted_decay_is_tau0(sol, ref):
    assert sol.fitted_decay == pytest.approx(ref.tau0, rel=1e-6)


def test_tail_oscillation_matches_indicial_pair(sol, ref_consts):
    rep = entire.verify_asymptotics(sol, ref_consts)
    assert rep["complex_roots"] and rep["fit_ok"]
    assert rep["predicted_rate"] == pytest.approx(1.0, abs=1e-10)
    assert rep["rate_rel_error"] <= 0.1
    assert rep["freq_rel_error"] <= 0.1
    assert rep["sign_changes"] >= 2
    assert rep["window"] == (-20.0, -10.0)


def test_hamiltonian_limits(sol, ref_consts, ref):
    H = entire.hamiltonian_boundary(sol, ref_consts)
    assert entire.hamiltonian_limit(ref, ref_consts) == pytest.approx(0.0625, abs=1e-12)
    assert H.right.limit == 0.0
    assert abs(H.values[-1]) <= 1e-8
    assert abs(H.values[0] - 0.0625) <= 1e-6
    assert abs(H.left.limit - 0.0625) <= 1e-12


def test_hamiltonian_formula(ref_consts):
    """H1 at the constant v_inf equals (1/ds) beta^{(p+1)/(p-1)} (1/(p+1) - 1/2)."""
    p = ProblemParams(5, 0.3, 4.0)
    c = compute_constants(p)
    want = c.beta ** ((p.p + 1) / (p.p - 1)) * (1 / (p.p + 1) - 0.5) / c.ds
    assert entire.hamiltonian_limit(p, c) == pytest.approx(want, rel=1e-12)


def test_physical_profile(sol, ref):
    r = np.geomspace(1e-8, math.exp(15), 400)
    prof = entire.to_physical(sol, r)
    assert prof.w[0] == pytest.approx(1.0, abs=1e-6)
    assert np.all(np.diff(prof.w) <= 1e-12)
    far = entire.to_physical(sol, np.array([math.exp(15)])).scaled[0]
    assert abs(far / math.sqrt(0.5) - 1) <= 1e-2


def test_normalization(sol, ref):
    assert entire.origin_amplitude(sol.v, ref.tau0) == pytest.approx(1.0, abs=1e-9)


def test_normalization_is_idempotent(sol, table0, ref_consts):
    assert entire.normalize_origin(sol, table0, ref_consts) is sol


def test_scaling_covariance(sol, table0, ref, ref_consts):
    """The translate of a solution is again a solution up to interpolation error."""
    sys_ = entire.entire_system(ref, table0, sol.grid, ref_consts)
    for mu in (0.8, 1.25):
        shifted = entire.rescale_profile(sol.v, mu, ref.tau0)
        res = sys_.apply(shifted, sol.v.left.amp2 * mu ** sys_.left.rate) - shifted ** ref.p
        assert np.max(np.abs(res)) <= 1e-4


def test_constant_guess_rejected(ref, ref_consts, grid, table0):
    vinf = ref_consts.beta ** 0.5
    flat = GridFunction(grid, np.full(grid.size, vinf), Tail(vinf), Tail(vinf))
    with pytest.raises(entire.PreconditionError):
        entire.solve_entire(ref, table0, flat, ref_consts)


def test_nonpositive_guess_rejected(ref, ref_consts, grid, table0):
    g = entire.sigmoid_guess(ref, ref_consts, grid)
    g[10] = -1e-3
    with pytest.raises(entire.PreconditionError):
        entire.solve_entire(ref, table0, g, ref_consts)


def test_mode1_table_rejected(ref, ref_consts, grid, table1):
    with pytest.raises(ValueError):
        entire.solve_entire(ref, table1, entire.sigmoid_guess(ref, ref_consts, grid), ref_consts)


def test_newton_budget_error(ref, ref_consts, grid, table0):
    with pytest.raises(entire.SolverError) as info:
        entire.solve_entire(ref, table0, entire.sigmoid_guess(ref, ref_consts, grid), ref_consts, max_iter=1)
    assert len(info.value.history) >= 1


def test_sigmoid_half_height(ref, ref_consts, grid):
    g = entire.sigmoid_guess(ref, ref_consts, grid)
    vinf = ref_consts.beta ** 0.5
    t0 = -math.log(vinf) / ref.tau0
    k = int(np.argmin(np.abs(grid.nodes - t0)))
    assert g[k] == pytest.approx(0.5 * vinf, rel=2e-2)


def test_count_oscillations():
    g = CylinderGrid(4.0, 0.1)
    v = GridFunction(g, 1 + 0.1 * np.cos(2 * g.nodes), None, None)
    win = np.ones(g.size, bool)
    # cos(2t) on [-4, 4] crosses zero at pi/4 + k pi/2, six times
    assert entire.count_oscillations(v, 1.0, win) == 6


def test_stable_case_monotone_tail():
    p = ProblemParams(10, 0.5, 4.0)
    c = compute_constants(p)
    assert c.stable
    g = CylinderGrid(20.0, 0.05)
    t0 = calibrate(p, 0, g)
    sol = entire.solve_entire(p, t0, entire.sigmoid_guess(p, c, g), c, tol=1e-10)
    assert sol.residual_norm <= 1e-8
    rep = entire.verify_asymptotics(sol, c)
    assert not rep["complex_roots"]
    assert rep["sign_changes"] == 0
