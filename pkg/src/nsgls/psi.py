"""psi-functions and the rearrangement-invariant norms built from them.

A psi-function is a positive weight on an exponent interval, kept on a
finite grid of exponents.  Grand Lebesgue norms are grid suprema of
||f||_p / psi(p); points outside the support count as psi = infinity, so
they contribute nothing to a supremum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import constants

__all__ = [
    "EXCLUDED",
    "PsiFunction",
    "NormProfile",
    "SupWeighted",
    "PowerMean",
    "default_grid",
    "gls_norm",
    "vector_gls_norm",
    "natural_psi",
    "interpolation_Z",
    "psi_from_Lab",
    "kappa",
    "kappa_factor",
    "psi_tilde",
    "psi_kappa",
    "h_zero",
    "mri_norm",
    "theta",
]


class _Excluded:
    """Marker for an exponent outside the support of a psi-function."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "EXCLUDED"

    def __bool__(self):
        return False


EXCLUDED = _Excluded()

_GRID_ATOL = 1e-12


def default_grid(a, b, points=33, include_b=False):
    """Log-spaced exponents on [a, b] (or [a, b) when ``include_b`` is False)."""
    if math.isinf(b):
        raise ValueError("default_grid: b must be finite")
    g = np.geomspace(a, b, points + (0 if include_b else 1))
    return g if include_b else g[:-1]


def _match(grid, p):
    idx = np.flatnonzero(np.abs(grid - p) <= _GRID_ATOL * max(1.0, abs(p)))
    return int(idx[0]) if idx.size else None


@dataclass(frozen=True)
class PsiFunction:
    """Weight psi on the support [a, b] (ends open unless flagged closed).

    ``values`` live on ``grid``; ``mask`` marks grid points inside the
    support.  ``func``, when given, evaluates psi exactly off the grid;
    otherwise log psi is interpolated linearly in 1/p between grid points.
    """

    grid: np.ndarray
    values: np.ndarray
    a: float
    b: float
    closed_a: bool = True
    closed_b: bool = False
    mask: Optional[np.ndarray] = None
    func: Optional[Callable[[float], float]] = field(default=None, compare=False)
    label: str = ""
    warnings: tuple = ()

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        if grid.shape != vals.shape or grid.size == 0:
            raise ValueError("PsiFunction: grid and values must be non-empty and aligned")
        if np.any(np.diff(grid) <= 0):
            raise ValueError("PsiFunction: grid must be strictly increasing")
        if not 1.0 <= self.a <= self.b:
            raise ValueError(f"PsiFunction: need 1 <= a <= b, got ({self.a}, {self.b})")
        inside = np.array([self._in_interval(p) for p in grid])
        mask = inside if self.mask is None else (np.asarray(self.mask, dtype=bool) & inside)
        if np.any(~(vals[mask] > 0)) or np.any(~np.isfinite(vals[mask])):
            raise ValueError("PsiFunction: values must be positive and finite on the support")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "mask", mask)
        if not self.warnings:
            object.__setattr__(self, "warnings", tuple(_log_convexity_warnings(grid[mask], vals[mask])))

    def _in_interval(self, p):
        if p < self.a or p > self.b:
            return False
        if p == self.a and not self.closed_a and self.a != self.b:
            return False
        if p == self.b and not self.closed_b and self.a != self.b:
            return False
        return True

    @property
    def support_grid(self):
        return self.grid[self.mask]

    @property
    def support_values(self):
        return self.values[self.mask]

    def contains(self, p):
        return self(p) is not EXCLUDED

    def __call__(self, p):
        i = _match(self.grid, p)
        if i is not None:
            return float(self.values[i]) if self.mask[i] else EXCLUDED
        if not self._in_interval(p):
            return EXCLUDED
        if self.func is not None:
            return float(self.func(p))
        sg, sv = self.support_grid, self.support_values
        if sg.size < 2 or p < sg[0] or p > sg[-1]:
            return EXCLUDED
        # log psi linear in 1/p between neighbouring support points
        inv = 1.0 / sg[::-1]
        return float(np.exp(np.interp(1.0 / p, inv, np.log(sv[::-1]))))

    def evaluate(self, p_grid):
        """List of values or EXCLUDED markers."""
        return [self(p) for p in p_grid]

    def restrict(self, keep, label=None):
        keep = np.asarray(keep, dtype=bool) & self.mask
        return PsiFunction(
            self.grid, self.values, self.a, self.b, self.closed_a, self.closed_b,
            mask=keep, func=None, label=label or self.label,
        )

    @classmethod
    def degenerate(cls, r):
        """psi_r: 1 at p = r, infinite (excluded) elsewhere."""
        return cls(np.array([float(r)]), np.array([1.0]), float(r), float(r), True, True, label=f"degenerate r={r}")

    @classmethod
    def table(cls, grid, values, a=None, b=None, closed_b=True, label="table"):
        grid = np.asarray(grid, dtype=float)
        return cls(grid, values, float(grid[0] if a is None else a), float(grid[-1] if b is None else b),
                   True, closed_b, label=label)


def _log_convexity_warnings(grid, vals, tol=1e-9):
    out = []
    if grid.size < 3:
        return out
    lv = np.log(vals)
    for i in range(1, grid.size - 1):
        p0, p1, p2 = grid[i - 1 : i + 2]
        w = (p2 - p1) / (p2 - p0)
        chord = w * lv[i - 1] + (1 - w) * lv[i + 1]
        if lv[i] > chord + tol:
            out.append(f"log-convexity violated at p={p1:.6g} by {lv[i] - chord:.3g}")
    return out


@dataclass(frozen=True)
class NormProfile:
    """p -> ||f||_p sampled on a grid."""

    grid: np.ndarray
    values: np.ndarray
    source: str = ""

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float).ravel()
        v = np.asarray(self.values, dtype=float).ravel()
        if g.shape != v.shape:
            raise ValueError("NormProfile: grid and values must be aligned")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("NormProfile: values must be finite and nonnegative")
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    @classmethod
    def of_field(cls, u, p_grid, source=""):
        from .field import lp_norms

        return cls(np.asarray(p_grid, dtype=float), lp_norms(u, p_grid), source)

    def lyapunov_violations(self, tol=1e-9):
        """Grid triples where log ||f||_p fails convexity in 1/p beyond ``tol``."""
        order = np.argsort(1.0 / self.grid)
        s = 1.0 / self.grid[order]
        v = self.values[order]
        if np.any(v == 0):
            return []
        lv = np.log(v)
        bad = []
        for i in range(1, s.size - 1):
            w = (s[i + 1] - s[i]) / (s[i + 1] - s[i - 1])
            chord = w * lv[i - 1] + (1 - w) * lv[i + 1]
            if lv[i] > chord + tol:
                bad.append(float(1.0 / s[i]))
        return bad


def gls_norm(profile, psi):
    """sup over shared grid points of ||f||_p / psi(p)."""
    best = None
    for p, val in zip(profile.grid, profile.values):
        w = psi(p)
        if w is EXCLUDED:
            continue
        ratio = val / w
        best = ratio if best is None else max(best, ratio)
    if best is None:
        raise ValueError("gls_norm: disjoint supports")
    return float(best)


def vector_gls_norm(component_profiles, psi):
    """Component-wise convention: max over k of ||u_k|| G(psi)."""
    return max(gls_norm(prof, psi) for prof in component_profiles)


def natural_psi(profiles, a=None, b=None, closed_b=True, label="natural"):
    """Pointwise sup of one or more norm profiles sharing a grid."""
    if isinstance(profiles, NormProfile):
        profiles = [profiles]
    profiles = list(profiles)
    if not profiles:
        raise ValueError("natural_psi: need at least one profile")
    grid = profiles[0].grid
    for prof in profiles[1:]:
        if prof.grid.shape != grid.shape or not np.allclose(prof.grid, grid, rtol=0, atol=_GRID_ATOL):
            raise ValueError("natural_psi: profiles must share a grid")
    vals = np.max(np.stack([prof.values for prof in profiles]), axis=0)
    if not np.all(vals > 0):
        raise ValueError("natural_psi: all-zero profile values; psi must be positive")
    return PsiFunction.table(grid, vals, a=a, b=b, closed_b=closed_b, label=label)


def interpolation_Z(x, y, a, b, p):
    """x^(a(b-p)/(p(b-a))) * y^(b(p-a)/(p(b-a))), the Lyapunov bound for ||f||_p."""
    if not (1.0 < a < b < math.inf):
        raise ValueError(f"interpolation_Z: need 1 < a < b < inf, got a={a}, b={b}")
    if not a <= p <= b:
        raise ValueError(f"interpolation_Z: p={p} outside [{a}, {b}]")
    if not (x > 0 and y > 0):
        raise ValueError("interpolation_Z: x, y must be positive")
    ex = a * (b - p) / (p * (b - a))
    ey = b * (p - a) / (p * (b - a))
    return math.exp(ex * math.log(x) + ey * math.log(y))


def psi_from_Lab(y2, yb, b, grid=None, points=33):
    """psi_b(p) = Z_{2,b}(y2, yb; p) on [2, b).

    The formula itself needs a > 1 strictly, which holds for a = 2.
    """
    if not b > 2:
        raise ValueError(f"psi_from_Lab: need b > 2, got {b}")
    if not (y2 > 0 and yb > 0):
        raise ValueError("psi_from_Lab: y2, yb must be positive")
    if grid is None:
        grid = default_grid(2.0, b, points)
    grid = np.asarray(grid, dtype=float)
    if np.any(grid < 2) or np.any(grid >= b):
        raise ValueError("psi_from_Lab: grid must lie in [2, b)")

    def f(p):
        return interpolation_Z(y2, yb, 2.0, b, p)

    vals = np.array([f(p) for p in grid])
    return PsiFunction(grid, vals, 2.0, float(b), True, False, func=f, label=f"interpolation b={b}")


def kappa(norm_p, norm_2, d, p):
    """Dilation-invariant ||u||_p^(p(d-2)/(d(p-2))) * ||u||_2^(2(p-d)/(d(p-2)))."""
    if not p > 2:
        raise ValueError(f"kappa: need p > 2, got {p}")
    if not (norm_p > 0 and norm_2 > 0):
        raise ValueError("kappa: norms must be positive")
    e1 = p * (d - 2.0) / (d * (p - 2.0))
    e2 = 2.0 * (p - d) / (d * (p - 2.0))
    return math.exp(e1 * math.log(norm_p) + e2 * math.log(norm_2))


def kappa_factor(kappa_value, d, p):
    """max(1, kappa^(2d/p)), evaluated in logs."""
    if kappa_value is None:
        return 1.0
    if not kappa_value > 0:
        raise ValueError("kappa_factor: kappa must be positive")
    return max(1.0, math.exp((2.0 * d / p) * math.log(kappa_value)))


def psi_tilde(psi, J_mask):
    """Restrict psi to the grid points flagged in ``J_mask``."""
    J_mask = np.asarray(J_mask, dtype=bool)
    if J_mask.shape != psi.grid.shape:
        raise ValueError("psi_tilde: mask must align with the psi grid")
    out_mask = J_mask & psi.mask
    if not out_mask.any():
        raise ValueError("supp psi~ = empty: the small-data set misses the support of psi")
    return psi.restrict(out_mask, label=f"{psi.label} restricted to J")


def _kappa_factors(psi, kappa_values, d):
    kappa_values = list(kappa_values)
    if len(kappa_values) != psi.grid.size:
        raise ValueError("grids misaligned: one kappa value per psi grid point required")
    return np.array([kappa_factor(k, d, p) for k, p in zip(kappa_values, psi.grid)])


def psi_kappa(psi, kappa_values, d):
    """psi(p) * max(1, kappa_p^(2d/p)); a ``None`` kappa entry means factor 1."""
    fac = _kappa_factors(psi, kappa_values, d)
    return PsiFunction(
        psi.grid, psi.values * fac, psi.a, psi.b, psi.closed_a, psi.closed_b,
        mask=psi.mask, label=f"{psi.label} x kappa factor",
    )


def h_zero(psi, kappa_values, d):
    """Same product as psi_kappa, returned as a profile over supp psi."""
    fac = _kappa_factors(psi, kappa_values, d)
    m = psi.mask
    return NormProfile(psi.grid[m], (psi.values * fac)[m], source="h0")


@dataclass(frozen=True)
class SupWeighted:
    """<h> = sup_p h(p) / w(p)."""

    weight: PsiFunction


@dataclass(frozen=True)
class PowerMean:
    """<h> = (average over [grid min, grid max] of h^q dp)^(1/q), trapezoid rule."""

    q: float = 2.0


def mri_norm(h, flavor):
    grid = np.asarray(h.grid, dtype=float)
    vals = np.asarray(h.values, dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ValueError("mri_norm: h must be finite on its grid")
    if isinstance(flavor, SupWeighted):
        for p in grid:
            w = flavor.weight(p)
            if w is not EXCLUDED and not w > 0:
                raise ValueError("mri_norm: nonpositive weight")
        return gls_norm(NormProfile(grid, vals), flavor.weight)
    if isinstance(flavor, PowerMean):
        q = flavor.q
        if not q >= 1:
            raise ValueError("mri_norm: PowerMean needs q >= 1")
        if grid.size == 1:
            return float(vals[0])
        peak = float(vals.max())
        if peak == 0.0:
            return 0.0
        span = grid[-1] - grid[0]
        avg = np.trapezoid((vals / peak) ** q, grid) / span
        return peak * float(avg) ** (1.0 / q)
    raise TypeError(f"mri_norm: unknown flavor {flavor!r}")


def theta(psi, d, p):
    """[B21(d,p)/p]^(1/r(p)) psi(d)^(2/(p-d+2)) psi(p)^((p-d)/(p-d+2))."""
    psi_d = psi(d)
    if psi_d is EXCLUDED:
        raise ValueError(f"theta: d = {d} not in supp psi")
    psi_p = psi(p)
    if psi_p is EXCLUDED:
        raise ValueError(f"theta: p = {p} not in supp psi")
    if not p > d:
        raise ValueError(f"theta: need p > d, got p={p}")
    r = constants.r_exponent(d, p)
    log_val = (
        math.log(constants.constant_B21(d, p) / p) / r
        + (2.0 / (p - d + 2.0)) * math.log(psi_d)
        + ((p - d) / (p - d + 2.0)) * math.log(psi_p)
    )
    return math.exp(log_val)
