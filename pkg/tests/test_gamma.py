import cmath
import math

import pytest
from hypothesis import given, strategies as st
from scipy import special

from fraclane.gamma import GammaPoleError, gamma, gamma_sign, log_gamma, rgamma


@given(st.floats(0.1, 50.0))
def test_real_accuracy(x):
    assert gamma(x) == pytest.approx(math.gamma(x), rel=1e-13)


@given(st.floats(-9.9, 0.09).filter(lambda x: abs(x - round(x)) > 1e-3))
def test_reflection_branch(x):
    assert gamma(x) == pytest.approx(math.gamma(x), rel=1e-12)


@given(st.floats(-5.0, 20.0), st.floats(0.01, 10.0))
def test_complex_matches_scipy(a, b):
    z = complex(a, b)
    assert abs(gamma(z) / special.gamma(z) - 1) < 1e-12


@given(st.floats(0.6, 30.0), st.floats(-10.0, 10.0))
def test_conjugate_symmetry(a, b):
    z = complex(a, b)
    assert abs(gamma(z.conjugate()) - gamma(z).conjugate()) <= 1e-13 * abs(gamma(z))


@given(st.floats(0.2, 20.0))
def test_recurrence(x):
    assert gamma(x + 1) == pytest.approx(x * gamma(x), rel=1e-13)


@pytest.mark.parametrize("k", [0, -1, -2, -7])
def test_poles(k):
    with pytest.raises(GammaPoleError):
        gamma(float(k))
    with pytest.raises(GammaPoleError):
        log_gamma(k)
    assert rgamma(float(k)) == 0.0


def test_half_integer_values():
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma(-0.5) == pytest.approx(-2 * math.sqrt(math.pi), rel=1e-14)
    assert gamma_sign(-0.5) == -1.0 and gamma_sign(-1.5) == 1.0


def test_complex_log_continuous_on_right_half_plane():
    z = complex(3.0, 4.0)
    assert abs(cmath.exp(log_gamma(z)) - special.gamma(z)) < 1e-12 * abs(special.gamma(z))
