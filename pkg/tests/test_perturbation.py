"""Scaled potentials, the fixed-point bound state and the lambda sweep."""

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fraclane import entire, perturbation
from fraclane.perturbation import InvalidPotential, LambdaTooLarge, PotentialSpec


@pytest.fixture(scope="module")
def spec(ref):
    return PotentialSpec.power_tail(2 * ref.s + 0.5)


@pytest.fixture(scope="module")
def run(ref, table0, sol, pot, norms, spec, grid):
    def go(lam, **kw):
        Vl = perturbation.scale_potential(spec, lam, grid, ref.s)
        return perturbation.fixed_point(ref, table0, sol, pot, Vl, norms, **kw)
    return go


@pytest.mark.parametrize("mu", [1.0, 0.5])
def test_power_tail_needs_mu_above_2s(mu):
    with pytest.raises(InvalidPotential, match="mu > 2s"):
        PotentialSpec.power_tail(mu).check(0.5)


@pytest.mark.parametrize("kw", [{"family": "gauss"}, {"family": "powerTail", "amp": -1.0},
                                {"family": "compactBump", "radius": 0.0},
                                {"family": "powerTail", "amp": math.inf}])
def test_spec_rejects_bad_input(kw):
    with pytest.raises(InvalidPotential):
        PotentialSpec(**kw)


def test_families_evaluate():
    r = np.array([0.0, 0.5, 2.0])
    assert PotentialSpec.power_tail(1.5, amp=2.0)(r) == pytest.approx(2 * (1 + r * r) ** -0.75)
    bump = PotentialSpec.compact_bump(1.0)(r)
    assert bump[0] == 1.0 and 0 < bump[1] < 1 and bump[2] == 0.0
    assert np.all(PotentialSpec.zero()(r) == 0)
    for sp in (PotentialSpec.power_tail(1.5), PotentialSpec.compact_bump(), PotentialSpec.zero()):
        assert sp.check(0.5) <= 1e-2


def test_decay_profile_is_tail_sup():
    r, a = PotentialSpec.power_tail(1.5).decay_profile(0.5)
    assert np.all(np.diff(a) <= 0)
    assert a[-1] == pytest.approx(r[-1] * (1 + r[-1] ** 2) ** -0.75, rel=1e-12)


def test_lambda_one_is_identity(spec, grid, ref):
    Vl = perturbation.scale_potential(spec, 1.0, grid, ref.s)
    r = np.geomspace(1e-3, 1e3, 50)
    assert np.array_equal(Vl.physical(r), spec(r))
    rg = np.exp(-grid.nodes)
    assert Vl.values.values == pytest.approx(rg ** (2 * ref.s) * spec(rg), rel=1e-14)


@pytest.mark.parametrize("lam", [0.5, 0.1, 1e-3])
def test_sup_scaling(spec, grid, ref, lam):
    Vl = perturbation.scale_potential(spec, lam, grid, ref.s)
    assert Vl.sup == pytest.approx(lam ** (-2 * ref.s) * spec.sup, rel=1e-14)
    assert Vl.physical(np.array([0.0]))[0] == pytest.approx(Vl.sup, rel=1e-14)


@given(st.floats(0.01, 1.0), st.floats(0.01, 1.0))
def test_composite_scaling(spec, grid, ref, a, b):
    """(V_a)_b = V_{ab}: scaling twice equals scaling once by the product."""
    r = np.geomspace(1e-4, 1e4, 40)
    Va = perturbation.scale_potential(spec, a, grid, ref.s)
    Vab = perturbation.scale_potential(spec, a * b, grid, ref.s)
    twice = b ** (-2 * ref.s) * Va.physical(r / b)
    assert twice == pytest.approx(Vab.physical(r), rel=1e-12)


@pytest.mark.parametrize("lam", [0.0, -0.1, 1.5])
def test_lambda_range_enforced(spec, grid, lam):
    with pytest.raises(ValueError):
        perturbation.scale_potential(spec, lam, grid, 0.5)


def test_forcing_norm_decreases(spec, grid, ref, sol, norms):
    f = [perturbation.forcing_norm(sol, perturbation.scale_potential(spec, lam, grid, ref.s), norms)
         for lam in (0.2, 0.1, 0.05, 0.025)]
    assert all(b < a for a, b in zip(f, f[1:]))


@given(st.floats(0.05, 2.0), st.floats(-1e-3, 1e-3))
def test_nonlinearity_is_quadratic(v, eta):
    N = perturbation._nonlinear(np.array([v]), np.array([eta]), 3.0)[0]
    assert perturbation._nonlinear(np.array([v]), np.array([0.0]), 3.0)[0] == 0.0
    assert abs(N) <= 3 * (v + 1) * eta * eta + 1e-15


def test_zero_potential_gives_zero(ref, table0, sol, pot, norms, grid):
    Vl = perturbation.scale_potential(PotentialSpec.zero(), 0.1, grid, ref.s)
    bs = perturbation.fixed_point(ref, table0, sol, pot, Vl, norms)
    assert np.all(bs.eta.values == 0.0)
    assert bs.phi_star == 0.0


def test_default_radius_rejects_large_lambda(run):
    with pytest.raises(LambdaTooLarge, match="smaller lambda"):
        run(0.2)


@pytest.mark.parametrize("lam", [1e-5, 1e-6])
def test_small_lambda_bound_state(run, sol, ref, lam):
    bs = run(lam)
    assert bs.phi_star < bs.rho == pytest.approx(0.1 * math.sqrt(0.5))
    assert bs.residual <= 1e-6
    assert max(bs.contraction_ratios[1:]) <= 0.9
    y = np.geomspace(1e-3, 1e6, 200)
    assert np.all(bs.u(y, sol) > 0)
    # sup u = lambda^{tau0} (1 + O(||phi||_*))
    assert abs(bs.u_sup / lam ** ref.tau0 - 1) <= bs.phi_star
    assert bs.reconstruction["amplitude"] == pytest.approx(lam ** ref.tau0)


def test_phi_shrinks_with_lambda(run):
    """With the ball test lifted, lambda = 0.05 gives a smaller ||phi||_* than 0.1."""
    a, b = run(0.1, rho=math.inf), run(0.05, rho=math.inf)
    assert b.phi_star < a.phi_star
    assert max(a.residual, b.residual) <= 1e-6


def test_unnormalized_solution_rejected(ref, ref_consts, grid, table0, pot, norms, spec):
    raw = entire.solve_entire(ref, table0, entire.sigmoid_guess(ref, ref_consts, grid), ref_consts)
    Vl = perturbation.scale_potential(spec, 1e-5, grid, ref.s)
    with pytest.raises(entire.PreconditionError, match="w\\(0\\) = 1"):
        perturbation.fixed_point(ref, table0, raw, pot, Vl, norms)


def test_mode1_table_rejected(ref, table1, sol, pot, norms, spec, grid):
    Vl = perturbation.scale_potential(spec, 1e-5, grid, ref.s)
    with pytest.raises(ValueError):
        perturbation.fixed_point(ref, table1, sol, pot, Vl, norms)


def test_sweep_empty(ref, table0, sol, pot, norms, spec):
    res = perturbation.lambda_sweep(ref, table0, sol, pot, spec, [], norms)
    assert res.rows == [] and math.isnan(res.slope) and res.working_range is None


@pytest.mark.parametrize("lams", [[0.1, 0.2], [0.1, 0.1]])
def test_sweep_needs_decreasing(ref, table0, sol, pot, norms, spec, lams):
    with pytest.raises(ValueError):
        perturbation.lambda_sweep(ref, table0, sol, pot, spec, lams, norms)


def test_sweep_records_failures_and_continues(ref, table0, sol, pot, norms, spec):
    res = perturbation.lambda_sweep(ref, table0, sol, pot, spec, [0.2, 1e-5, 1e-6], norms)
    assert res.rows[0]["error"] and res.rows[0]["state"] is None
    assert not res.rows[1]["error"] and not res.rows[2]["error"]
    assert res.rows[2]["phiStarNorm"] < res.rows[1]["phiStarNorm"]
    assert res.working_range == (1e-6, 1e-5)
    assert res.slope > 0
