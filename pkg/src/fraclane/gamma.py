"""Gamma function via the Lanczos approximation (g = 7, 9 terms).

Works for real and complex scalars. Arguments with real part below 1/2 go
through the reflection formula.
"""

import cmath
import math

REFLECTION_THRESHOLD = 0.5

_G = 7.0
_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class GammaPoleError(ValueError):
    """Raised when the argument is a pole of Gamma (0, -1, -2, ...)."""


def _pole_index(z):
    re, im = (z.real, z.imag) if isinstance(z, complex) else (z, 0.0)
    if im == 0.0 and re <= 0.0 and re == math.floor(re):
        return int(re)
    return None


def _lanczos_series(z):
    # z here is the shifted argument (original - 1)
    acc = _COEF[0]
    for k in range(1, len(_COEF)):
        acc += _COEF[k] / (z + k)
    return acc


def _log_gamma_right(z):
    """log Gamma(z) for Re z >= 1/2 (complex result)."""
    z = complex(z) - 1.0
    t = z + _G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * cmath.log(t) - t + cmath.log(_lanczos_series(z))


def log_gamma(z):
    """Log of the Gamma function.

    For a real argument returns ``log|Gamma(z)|`` (see :func:`gamma_sign` for
    the sign). For a complex argument returns a branch of ``log Gamma(z)``
    that is continuous on ``Re z >= 1/2``; on the reflected half plane the
    imaginary part is only defined modulo ``2*pi``.
    """
    k = _pole_index(z)
    if k is not None:
        raise GammaPoleError(f"Gamma has a pole at z = {k}")
    if isinstance(z, complex):
        if z.real >= REFLECTION_THRESHOLD:
            return _log_gamma_right(z)
        return (math.log(math.pi) - cmath.log(cmath.sin(math.pi * z))
                - _log_gamma_right(1.0 - z))
    z = float(z)
    if z >= REFLECTION_THRESHOLD:
        return _log_gamma_right(z).real
    return (math.log(math.pi) - math.log(abs(math.sin(math.pi * z)))
            - _log_gamma_right(1.0 - z).real)


def gamma_sign(x):
    """Sign of Gamma(x) for real, non-pole x."""
    x = float(x)
    if _pole_index(x) is not None:
        raise GammaPoleError(f"Gamma has a pole at z = {int(x)}")
    if x > 0:
        return 1.0
    return 1.0 if math.floor(x) % 2 == 0 else -1.0


def gamma(z):
    if isinstance(z, complex):
        return cmath.exp(log_gamma(z))
    return gamma_sign(z) * math.exp(log_gamma(z))


def rgamma(z):
    """1/Gamma(z); entire, so poles of Gamma map to exact zeros."""
    if _pole_index(z) is not None:
        return 0.0 * z
    if isinstance(z, complex):
        return cmath.exp(-log_gamma(z))
    return gamma_sign(z) * math.exp(-log_gamma(z))
