"""Closed-form constants: sharp Sobolev and Riesz bounds, the Cui-type
constants built from them, and the small-data threshold.

Every function raises ``ValueError`` outside its domain.  Products that can
overflow for large dimension are evaluated through ``log_gamma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .specfun import cot, double_factorial, gamma, log_gamma

__all__ = [
    "ConstantsRecord",
    "ks_sobolev",
    "ks_2d3",
    "ks_2d3_factorial",
    "riesz_integral",
    "sphere_factor",
    "riesz_prefactor",
    "kr_riesz",
    "pichorides_norm",
    "constant_A",
    "constant_B21",
    "constant_C27",
    "constant_C77",
    "threshold",
    "threshold_mask",
    "r_exponent",
    "constants_record",
    "RIESZ_BOUNDS",
]

RIESZ_BOUNDS = ("kr", "pichorides")


def _require(cond, msg):
    if not cond:
        raise ValueError(msg)


def ks_sobolev(d, q):
    """Sharp constant K in ||phi||_r <= K ||grad phi||_q, 1/r = 1/q - 1/d."""
    _require(int(d) == d and d >= 2, f"ks_sobolev: d must be an integer >= 2, got {d}")
    _require(1.0 <= q < d, f"ks_sobolev: need 1 <= q < d, got q={q}, d={d}")
    log_ratio = (
        log_gamma(1.0 + d / 2.0) + log_gamma(d) - log_gamma(d / q) - log_gamma(1.0 + d - d / q)
    )
    return (
        math.pi ** -0.5
        * d ** (-1.0 / q)
        * ((q - 1.0) / (d - q)) ** ((q - 1.0) / q)
        * math.exp(log_ratio / d)
    )


def _ks_2d3_prefactor(d):
    return (
        2.0 ** (1.0 / d)
        * math.pi ** (-(d + 1.0) / (2.0 * d))
        * (2.0 - 3.0 / d)
        * (2.0 * d - 3.0) ** (-3.0 / (2.0 * d))
    )


def ks_2d3(d):
    """K_S(d, 2d/3) from its simplified closed form in Gamma functions."""
    _require(int(d) == d and d >= 3, f"ks_2d3: d must be an integer >= 3, got {d}")
    d = int(d)
    log_ratio = log_gamma(1.0 + d / 2.0) + log_gamma(d) - log_gamma(d - 0.5)
    return _ks_2d3_prefactor(d) * math.exp(log_ratio / d)


def ks_2d3_factorial(d):
    """K_S(d, 2d/3) via the parity-split factorial expansion (moderate d only)."""
    _require(int(d) == d and d >= 3, f"ks_2d3_factorial: d must be an integer >= 3, got {d}")
    d = int(d)
    dfact = math.prod(range(2 * d - 3, 0, -2))
    if d % 2 == 0:
        num = 2 ** (d - 1) * math.factorial(d // 2) * math.factorial(d - 1)
        bracket = (num / dfact) / math.sqrt(math.pi)
    else:
        num = 2 ** ((d - 3) // 2) * math.prod(range(d, 0, -2)) * math.factorial(d - 1)
        bracket = num / dfact
    return _ks_2d3_prefactor(d) * bracket ** (1.0 / d)


def riesz_integral(p):
    """I(p) = Gamma(1/2 - 1/(2p)) Gamma(1/(2p)) / (2 sqrt(pi))."""
    _require(p > 1.0, f"riesz_integral: need p > 1, got {p}")
    return gamma(0.5 - 0.5 / p) * gamma(0.5 / p) / (2.0 * math.sqrt(math.pi))


def sphere_factor(d):
    """omega~(d) = 4 pi^(d/2 - 1) / Gamma(d/2)."""
    return 4.0 * math.pi ** (d / 2.0 - 1.0) / gamma(d / 2.0)


def riesz_prefactor(d):
    """c(d) = -pi^((d+1)/2) / Gamma((d+1)/2), sign included."""
    return -math.pi ** ((d + 1.0) / 2.0) / gamma((d + 1.0) / 2.0)


def kr_riesz(d, p):
    """Upper bound for ||R_k||_{L_p -> L_p}; the sign of c(d) is dropped."""
    _require(int(d) == d and d >= 2, f"kr_riesz: d must be an integer >= 2, got {d}")
    _require(p > 1.0, f"kr_riesz: need p > 1, got {p}")
    return abs(riesz_prefactor(d)) * (p / (p - 1.0)) * sphere_factor(d) * riesz_integral(p)


def pichorides_norm(p):
    """Exact L_p operator norm of a Riesz transform, cot(pi / (2 p*))."""
    _require(p > 1.0, f"pichorides_norm: need p > 1, got {p}")
    p_star = max(p, p / (p - 1.0))
    return cot(math.pi / (2.0 * p_star))


def constant_A(d, p):
    _require(p > d, f"constant_A: need p > d, got p={p}, d={d}")
    return ((p + d) / p) ** ((p + d) / (p - d))


def constant_B21(d, p):
    _require(int(d) == d and d >= 3, f"constant_B21: d must be an integer >= 3, got {d}")
    _require(p >= 2.0, f"constant_B21: need p >= 2, got {p}")
    return ks_2d3(d) ** 2 * p * p / 4.0


def _riesz_bound(d, p, riesz):
    if riesz == "kr":
        return kr_riesz(d, p)
    if riesz == "pichorides":
        return pichorides_norm(p)
    raise ValueError(f"unknown Riesz bound {riesz!r}; expected one of {RIESZ_BOUNDS}")


def constant_C27(d, p, riesz="kr"):
    _require(int(d) == d and d >= 3, f"constant_C27: d must be an integer >= 3, got {d}")
    _require(p > 1.0, f"constant_C27: need p > 1, got {p}")
    kr = _riesz_bound(d, p, riesz)
    return 0.25 * p * p * ks_2d3(d) ** 2 * kr**2 * (d * d + d)


def log_constant_C77(d, p, riesz="kr"):
    """log C77; C77 itself overflows quickly as p -> d+."""
    _require(p > d, f"constant_C77: need p > d, got p={p}, d={d}")
    return math.log(constant_A(d, p)) + (2.0 * p / (p - d)) * math.log(constant_C27(d, p, riesz))


def constant_C77(d, p, riesz="kr"):
    return math.exp(log_constant_C77(d, p, riesz))


def threshold(d, p, riesz="kr"):
    """Smallness level 1 / (2 C77(d, p)) for ||u0||_d."""
    return math.exp(-math.log(2.0) - log_constant_C77(d, p, riesz))


def threshold_mask(norm_d, d, p_grid, riesz="kr"):
    """Boolean mask of the grid points p with ||u0||_d < threshold(d, p).

    Points with p <= d have no threshold and are never in the set.
    """
    mask = np.zeros(len(p_grid), dtype=bool)
    for i, p in enumerate(p_grid):
        if p > d:
            mask[i] = norm_d < threshold(d, p, riesz)
    return mask


def r_exponent(d, p):
    """Time exponent r(p) = p (p - d + 2) / (p - d) of the mixed-norm bound."""
    _require(p > d, f"r_exponent: need p > d, got p={p}, d={d}")
    return p * (p - d + 2.0) / (p - d)


@dataclass(frozen=True)
class ConstantsRecord:
    """All constants at one (d, p).  Cells outside their domain are None and
    the reason is kept in ``reasons``."""

    d: int
    p: float
    KS_sobolev: float | None
    KS_2d3: float | None
    KR: float | None
    pichorides: float | None
    A: float | None
    B21: float | None
    C27: float | None
    C77: float | None
    threshold: float | None
    riesz: str = "kr"
    reasons: dict = field(default_factory=dict, compare=False)

    CSV_COLUMNS = ("d", "p", "KS_2d3", "KR", "pichorides", "A", "B21", "C27", "C77", "threshold")

    def valid_cells(self):
        return [
            f.name
            for f in fields(self)
            if f.name not in ("d", "p", "riesz", "reasons") and getattr(self, f.name) is not None
        ]

    def as_row(self):
        row = {}
        for col in self.CSV_COLUMNS:
            val = getattr(self, col)
            row[col] = f"n/a ({self.reasons[col]})" if val is None else val
        return row


def constants_record(d, p, riesz="kr"):
    d = int(d)
    p = float(p)
    values = {}
    reasons = {}

    def attempt(name, fn):
        try:
            values[name] = fn()
        except (ValueError, OverflowError) as exc:
            values[name] = None
            reasons[name] = _short_reason(exc)

    attempt("KS_sobolev", lambda: ks_sobolev(d, p))
    attempt("KS_2d3", lambda: ks_2d3(d))
    attempt("KR", lambda: kr_riesz(d, p))
    attempt("pichorides", lambda: pichorides_norm(p))
    attempt("A", lambda: constant_A(d, p))
    attempt("B21", lambda: constant_B21(d, p))
    attempt("C27", lambda: constant_C27(d, p, riesz))
    attempt("C77", lambda: constant_C77(d, p, riesz))
    attempt("threshold", lambda: threshold(d, p, riesz))
    return ConstantsRecord(d=d, p=p, riesz=riesz, reasons=reasons, **values)


def _short_reason(exc):
    msg = str(exc)
    if "need p > d" in msg:
        return "needs p > d"
    if "need p > 1" in msg:
        return "needs p > 1"
    if "need p >= 2" in msg:
        return "needs p >= 2"
    if "1 <= q < d" in msg:
        return "needs 1 <= p < d"
    if "integer >= 3" in msg:
        return "needs d >= 3"
    if isinstance(exc, OverflowError) or "range" in msg:
        return "overflow"
    return msg.replace(",", ";")
