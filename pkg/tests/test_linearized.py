"""Linearized operator: potential, kernels, weighted norms, solves and decay fits."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import linalg

from fraclane import entire, linearized
from fraclane.cylinder import CylinderGrid, calibrate
from fraclane.params import ProblemParams, compute_constants, indicial_roots


def _solve(params, h):
    c = compute_constants(params)
    g = CylinderGrid(20.0, h)
    t0, t1 = calibrate(params, 0, g), calibrate(params, 1, g)
    raw = entire.solve_entire(params, t0, entire.sigmoid_guess(params, c, g), c, tol=1e-10)
    sol = entire.normalize_origin(raw, t0, c, tol=1e-10)
    return sol, linearized.build_potential(sol, c), t0, t1


@pytest.fixture(scope="module")
def coarse(ref):
    return _solve(ref, 0.1)


@pytest.fixture(scope="module")
def op0(sol, pot, table0, ref_consts):
    return linearized.assemble(sol, pot, table0, ref_consts)


@pytest.fixture(scope="module")
def below_threshold():
    """(3, 1/2, 2.5): p under (n+2s-1)/(n-2s-1) = 3, so mode 1 needs orthogonality."""
    p = ProblemParams(3, 0.5, 2.5)
    sol, pot, t0, t1 = _solve(p, 0.05)
    return p, linearized.assemble(sol, pot, t1)


def test_exponent_identity(ref):
    for p in (ref, ProblemParams(5, 0.3, 4.0), ProblemParams(10, 0.9, 7.5)):
        assert (p.p - 1) * p.tau0 == pytest.approx(2 * p.s, abs=1e-14)


def test_potential_limits(sol, pot, ref, ref_consts):
    assert np.all(pot.values > 0)
    # the grid end still carries the e^{t/2} far-field correction; extrapolate
    fitted = ref.p * sol.fitted_limit ** (ref.p - 1)
    assert abs(fitted - ref.p * ref_consts.beta) <= 1e-6
    assert pot.V.left.limit == pot.limit
    assert pot.limit == pytest.approx(1.5, abs=1e-12)
    assert abs(pot.right_exponent() / (2 * ref.s) - 1) <= 0.05


def test_kernel_residuals(sol, pot, table0, table1):
    rep = linearized.kernel_residuals(sol, pot, table0, table1)
    assert rep.z0_residual <= 1e-4
    assert rep.w1_residual <= 1e-4


def test_kernel_residuals_decrease_under_refinement(sol, pot, table0, table1, coarse):
    fine = linearized.kernel_residuals(sol, pot, table0, table1)
    rough = linearized.kernel_residuals(*coarse)
    assert fine.z0_residual < rough.z0_residual
    assert fine.w1_residual < rough.w1_residual


def test_kernel_residuals_need_matching_tables(sol, pot, table0):
    with pytest.raises(ValueError):
        linearized.kernel_residuals(sol, pot, table0, table0)


def test_z0_decay_exponent_is_minus_tau0(sol, pot, table0, table1, ref):
    """z0 inherits the tail of w: exponent -tau0 within 10%."""
    rep = linearized.kernel_residuals(sol, pot, table0, table1)
    assert abs(rep.z0_decay_exponent / -ref.tau0 - 1) <= 0.1


def test_w_prime_decay_exponent(sol, pot, table0, table1, ref):
    rep = linearized.kernel_residuals(sol, pot, table0, table1)
    assert rep.w1_decay_exponent == pytest.approx(-ref.tau0 - 1, rel=0.1)


def test_sigma_default_and_bounds(ref):
    nm = linearized.WeightedNorms(ref)
    assert nm.sigma == pytest.approx(0.45 * min(ref.tau0, ref.n - 2 * ref.s))
    for bad in (0.0, -0.1, ref.tau0, 3.0):
        with pytest.raises(ValueError):
            linearized.WeightedNorms(ref, bad)


@given(st.floats(-3, 3), st.integers(0, 2 ** 31))
def test_norms_are_norms(ref, a, seed):
    nm = linearized.WeightedNorms(ref)
    gen = np.random.default_rng(seed)
    t = np.linspace(-10, 10, 81)
    f, g = gen.normal(size=(2, t.size))
    assert nm.star_cyl(t, a * f) == pytest.approx(abs(a) * nm.star_cyl(t, f), rel=1e-12, abs=1e-300)
    assert nm.star_cyl(t, f + g) <= nm.star_cyl(t, f) + nm.star_cyl(t, g) + 1e-12
    assert nm.star_star_cyl(t, f + g) <= nm.star_star_cyl(t, f) + nm.star_star_cyl(t, g) + 1e-12


def test_star_norm_physical_matches_cylinder(ref):
    nm = linearized.WeightedNorms(ref)
    r = np.geomspace(1e-4, 1e4, 101)
    phi = 1 / (1 + r)
    t = -np.log(r)
    assert nm.star(r, phi) == pytest.approx(nm.star_cyl(t, r ** ref.tau0 * phi), rel=1e-14)


@pytest.mark.parametrize("load", [
    lambda r: 1 / (1 + r ** 2) ** 2.5,
    lambda r: np.exp(-r),
    lambda r: r ** 0.3 / (1 + r ** 4),
])
def test_solve_residual_and_constant(op0, norms, load):
    s = linearized.solve_linearized(op0, load, norms)
    assert s.residual <= 1e-9
    assert s.ratio <= s.C_estimate


def test_stability_constant_stable(op0, norms, coarse, ref):
    C = linearized.stability_constant(op0, norms)
    sol, pot, t0, _ = coarse
    Cc = linearized.stability_constant(linearized.assemble(sol, pot, t0), norms)
    assert abs(C / Cc - 1) <= 0.2


def test_bump_round_trip(op0, norms, grid):
    """L_0 of a bump solves back to the bump up to the scaling kernel."""
    bump = np.exp(-(grid.nodes - 1) ** 2)
    b = np.concatenate([bump, [0.0]])
    ht = op0.apply(b)
    s = linearized.solve_linearized(op0, ht, norms)
    x = np.concatenate([s.psi.values, [s.psi.left.amp2]])
    null = linalg.svd(op0.stacked()[:-1])[2][-1]
    d = x - b
    assert np.max(np.abs(d - (d @ null) * null)) <= 1e-6


def test_mode1_orthogonality_violation(below_threshold, norms):
    p, op1 = below_threshold
    assert op1.needs_orthogonality
    with pytest.raises(linearized.SolvabilityError, match="orthogonal"):
        linearized.solve_linearized(op1, op1.kernel, linearized.WeightedNorms(p))


def test_mode1_orthogonal_load_solves(below_threshold):
    p, op1 = below_threshold
    t = op1.grid.nodes
    h = np.exp(-(t - 1) ** 2)
    k, w = op1.kernel, op1.weights
    h = h - np.sum(w * h * k) / np.sum(w * k * k) * k
    s = linearized.solve_linearized(op1, h, linearized.WeightedNorms(p))
    assert s.residual <= 1e-9
    assert s.projection <= 1e-6


def test_mode1_free_at_reference(sol, pot, table1, ref_consts):
    # p = 3 is the threshold itself, so no orthogonality is imposed
    assert not linearized.assemble(sol, pot, table1, ref_consts).needs_orthogonality


def test_decay_fit_mode0(op0, norms, ref, ref_consts):
    s = linearized.solve_linearized(op0, lambda r: 1 / (1 + r ** 2) ** 2.5, norms)
    rep = linearized.decay_fit(s.psi, ref, indicial_roots(ref, ref_consts, 0), norms)
    assert rep.predicted_far == pytest.approx(-(ref.n - 2 * ref.s) / 2, abs=1e-10)
    assert rep.far_rel_error <= 0.1
    assert np.isfinite(rep.weighted_interior_max)


def test_singular_report_overlap(op0):
    sv = linearized.singular_report(op0)
    assert sv.kernel_overlap >= 0.999
    assert sv.sigma_next > 1e-3


@pytest.mark.parametrize("h", [0.1, 0.05])
def test_mode0_smallest_singular_value(h, ref, coarse, op0):
    """Smoke test: the mode-0 map on bounded functions has no near kernel."""
    if h == 0.05:
        op = op0
    else:
        sol, pot, t0, _ = coarse
        op = linearized.assemble(sol, pot, t0)
    assert linearized.singular_report(op).sigma_min >= 1e-3
