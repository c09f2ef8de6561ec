import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fraclane.oracle import fl_oracle
from fraclane.params import (ConditioningError, InvalidParameters, ProblemParams, compute_constants,
                             indicial_roots, symbol)


@st.composite
def problems(draw):
    n = draw(st.integers(1, 10))
    s = draw(st.floats(0.1, 0.9))
    assume(n > 2 * s + 0.2)
    crit = (n + 2 * s) / (n - 2 * s)
    p = crit * draw(st.floats(1.05, 4.0))
    return ProblemParams(n, s, p)


@pytest.mark.parametrize("n,s,p,match", [
    (3, 0.5, 1.5, r"\(n\+2s\)/\(n-2s\)"),
    (3, 1.0, 3.0, "s must lie"),
    (0, 0.5, 3.0, "positive integer"),
    (1, 0.5, 5.0, "n > 2s"),
])
def test_invalid_parameters(n, s, p, match):
    with pytest.raises(InvalidParameters, match=match):
        ProblemParams(n, s, p)


def test_reference_constants(ref, ref_consts):
    assert ref_consts.beta == pytest.approx(0.5, abs=1e-12)
    assert ref_consts.ds == pytest.approx(-1.0, abs=1e-12)
    assert ref_consts.hardy == pytest.approx(2 / math.pi, abs=1e-10)
    assert ref_consts.stable is False
    assert ref.p * ref_consts.beta > ref_consts.hardy


def test_constants_pure(ref):
    assert compute_constants(ref) == compute_constants(ref)


@given(problems(), st.floats(0.02, 0.98))
def test_symbol_symmetry(prm, frac):
    tau = frac * (prm.n - 2 * prm.s)
    a, b = symbol(prm, 0, tau), symbol(prm, 0, prm.n - 2 * prm.s - tau)
    assert abs(a - b) <= 1e-10 * abs(a)


@given(problems())
def test_translation_identity(prm):
    beta = symbol(prm, 0, prm.tau0)
    assert abs(symbol(prm, 1, prm.tau0 + 1) - prm.p * beta) <= 1e-10 * prm.p * beta


@given(problems(), st.integers(0, 10))
def test_zero_roots_closed_form(prm, m):
    rep = indicial_roots(prm, compute_constants(prm), m) if m <= 1 else None
    if rep is not None:
        assert rep.roots_at_zero == (m, -(prm.n + m - 2 * prm.s))
    assert abs(symbol(prm, m, -m + 1e-7)) < 1e-5
    assert abs(symbol(prm, m, prm.n + m - 2 * prm.s - 1e-7)) < 1e-5


def test_symbol_vanishes_at_zero(ref):
    assert symbol(ref, 0, 0.0) == 0.0
    assert abs(symbol(ref, 0, 1e-9)) < 1e-8


def test_pole_proximity(ref):
    # Gamma((n+m-tau)/2) has a pole at tau = n + m
    with pytest.raises(ConditioningError):
        symbol(ref, 0, 3.0 + 1e-10)


def test_mode1_roots_at_infinity(ref, ref_consts):
    rep = indicial_roots(ref, ref_consts, 1)
    tau0 = ref.tau0
    want = sorted([-tau0 - 1, -(ref.n - 2 * ref.s) + tau0 + 1])
    assert sorted(rep.roots_at_infinity) == pytest.approx(want, abs=1e-10)


def test_mode0_complex_pair(ref, ref_consts):
    rep = indicial_roots(ref, ref_consts, 0)
    assert rep.complex_at_infinity
    assert rep.roots_at_infinity[0] == pytest.approx(-1.0, abs=1e-14)
    y = rep.roots_at_infinity[1]
    val = symbol(ref, 0, complex(1.0, y))
    assert abs(val - ref.p * ref_consts.beta) < 1e-10


def test_stable_case_has_real_roots():
    prm = ProblemParams(10, 0.5, 4.0)
    c = compute_constants(prm)
    assert c.stable and c.p_jl is not None and c.p_jl < 4.0
    rep = indicial_roots(prm, c, 0)
    assert not rep.complex_at_infinity
    a, b = rep.roots_at_infinity
    assert a + b == pytest.approx(-(prm.n - 2 * prm.s), abs=1e-10)


def test_pjl_is_the_stability_boundary():
    prm = ProblemParams(10, 0.5, 4.0)
    pjl = compute_constants(prm).p_jl
    lo, hi = ProblemParams(10, 0.5, pjl * 0.99), ProblemParams(10, 0.5, pjl * 1.01)
    assert not compute_constants(lo).stable
    assert compute_constants(hi).stable


@pytest.mark.parametrize("n,s,m,tau", [
    (3, 0.5, 0, 0.5),
    (3, 0.5, 0, 1.0),
    (3, 0.5, 1, 1.5),
    (3, 0.5, 2, 0.7),
    (4, 0.75, 1, 1.2),
    (2, 0.3, 0, 0.4),
])
def test_symbol_against_oracle(n, s, m, tau):
    prm = ProblemParams(n, s, 10.0)
    assert fl_oracle(prm, m, tau) == pytest.approx(symbol(prm, m, tau), rel=1e-6)


def test_oracle_hardy(ref, ref_consts):
    assert fl_oracle(ref, 0, 1.0) == pytest.approx(ref_consts.hardy, rel=1e-6)


def test_oracle_translation_identity(ref, ref_consts):
    assert fl_oracle(ref, 1, ref.tau0 + 1) == pytest.approx(ref.p * ref_consts.beta, rel=1e-6)


def test_zero_exponents_increase_with_mode(ref, ref_consts):
    ups = [indicial_roots(ref, ref_consts, m).roots_at_zero[0] for m in range(2)]
    ups += [float(m) for m in range(2, 11)]
    assert np.all(np.diff(ups) > 0)
