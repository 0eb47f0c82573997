"""Real special functions on the positive axis.

Gamma uses the Lanczos approximation (g = 7, nine coefficients) and the
upward recurrence for arguments below one; no reflection formula is needed
because every constant in the package takes positive arguments.
"""

import math

__all__ = ["gamma", "log_gamma", "double_factorial", "cot"]

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
_SQRT_2PI = math.sqrt(2.0 * math.pi)
# largest x with Gamma(x) < DBL_MAX
_GAMMA_XMAX = 171.6243769563027


def _lanczos_sum(z):
    s = _COEF[0]
    for i in range(1, len(_COEF)):
        s += _COEF[i] / (z + i)
    return s


def _check_positive(x):
    x = float(x)
    if not x > 0.0 or math.isinf(x):
        raise ValueError(f"gamma: argument must be finite and > 0, got {x!r}")
    return x


def gamma(x):
    """Gamma function for finite x > 0.

    Raises ``ValueError`` for x <= 0 and ``OverflowError`` once the result
    exceeds the double range (x > ~171.62).
    """
    x = _check_positive(x)
    if x > _GAMMA_XMAX:
        raise OverflowError(f"gamma({x}) exceeds the double range")
    if x < 1.0:
        return gamma(x + 1.0) / x
    if x > 30.0:
        # the power term loses ~x ulps; recur down instead (x - j is exact)
        k = int(x - 20.0)
        prod = 1.0
        for j in range(1, k + 1):
            prod *= x - j
        return gamma(x - k) * prod
    z = x - 1.0
    t = z + _G + 0.5
    return _SQRT_2PI * t ** (z + 0.5) * math.exp(-t) * _lanczos_sum(z)


def log_gamma(x):
    """Natural log of Gamma for finite x > 0 (no overflow for large x)."""
    x = _check_positive(x)
    if x < 1.0:
        return log_gamma(x + 1.0) - math.log(x)
    if x < 20.0:
        return math.log(gamma(x))
    z = x - 1.0
    t = z + _G + 0.5
    return math.log(_SQRT_2PI) + (z + 0.5) * math.log(t) - t + math.log(_lanczos_sum(z))


def double_factorial(n):
    """n!! with the conventions (-1)!! = 0!! = 1; exact up to n = 20."""
    n = int(n)
    if n < -1:
        raise ValueError(f"double_factorial: n must be >= -1, got {n}")
    return float(math.prod(range(n, 0, -2)))


def cot(x):
    """Cotangent on the open interval (0, pi)."""
    x = float(x)
    if not 0.0 < x < math.pi:
        raise ValueError(f"cot: argument must lie in (0, pi), got {x!r}")
    return math.cos(x) / math.sin(x)
