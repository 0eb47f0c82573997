"""Vector fields on a uniform periodic box and the integral functionals
measured on them.

The box [0, L)^d stands in for R^d.  All integrals use the rectangle rule,
which is spectrally accurate for smooth periodic integrands.  Norm
evaluations divide out the peak magnitude first, so fields with amplitudes
near the bottom of the double range still give finite, accurate norms.
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Grid",
    "VectorField",
    "NormTimeSeries",
    "SnapshotError",
    "lp_norm",
    "lp_norms",
    "component_lp_norms",
    "lp_norm_ratio",
    "mixed_norm",
    "w_functional",
    "w_profile",
    "w_ratio",
    "dilate",
    "make_initial",
    "INITIAL_KINDS",
    "boundary_leakage",
    "write_snapshot",
    "read_snapshot",
]

INITIAL_KINDS = ("taylor-green-2d", "taylor-green-3d", "random-solenoidal", "gaussian-bump")


@dataclass(frozen=True)
class Grid:
    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError(f"Grid: d must be 2 or 3, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1):
            raise ValueError(f"Grid: n must be a power of two >= 8, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"Grid: L must be positive and finite, got {self.L}")

    @property
    def shape(self):
        return (self.n,) * self.d

    @property
    def dx(self):
        return self.L / self.n

    @property
    def cell_volume(self):
        return self.dx**self.d

    @property
    def volume(self):
        return self.L**self.d

    def coords(self):
        """Tuple of d coordinate arrays (``ij`` indexing), x_j = j L / n."""
        x = np.arange(self.n) * self.dx
        return np.meshgrid(*([x] * self.d), indexing="ij")


@dataclass(frozen=True)
class VectorField:
    """d real components sampled on ``grid``; ``components`` has shape (d, n, ..., n)."""

    grid: Grid
    components: np.ndarray
    time_tag: Optional[float] = None

    def __post_init__(self):
        comps = np.array(self.components, dtype=np.float64, copy=True)
        expected = (self.grid.d,) + self.grid.shape
        if comps.shape != expected:
            raise ValueError(f"VectorField: components shape {comps.shape} != {expected}")
        if not np.all(np.isfinite(comps)):
            raise ValueError("VectorField: non-finite samples")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    @property
    def d(self):
        return self.grid.d

    def magnitude(self):
        return np.sqrt(np.sum(self.components**2, axis=0))

    def max_magnitude(self):
        scale = np.max(np.abs(self.components))
        if scale == 0.0:
            return 0.0
        return float(scale * np.max(np.sqrt(np.sum((self.components / scale) ** 2, axis=0))))

    def mean(self):
        return self.components.reshape(self.d, -1).mean(axis=1)

    def scaled(self, a):
        return VectorField(self.grid, a * self.components, self.time_tag)

    def __add__(self, other):
        if other.grid != self.grid:
            raise ValueError("cannot add fields on different grids")
        return VectorField(self.grid, self.components + other.components, self.time_tag)

    @classmethod
    def zeros(cls, grid, time_tag=None):
        return cls(grid, np.zeros((grid.d,) + grid.shape), time_tag)


def _scaled_magnitude(u):
    """(peak, |u| / peak); peak = 0 for the zero field."""
    peak = u.max_magnitude()
    if peak == 0.0:
        return 0.0, None
    comps = u.components / peak
    return peak, np.sqrt(np.sum(comps**2, axis=0))


def _lp_of_scaled(mag, p, cell_volume):
    if math.isinf(p):
        return float(mag.max())
    return float((np.sum(mag**p) * cell_volume) ** (1.0 / p))


def lp_norm(u, p):
    """||u||_p with the pointwise Euclidean magnitude; ``p = math.inf`` gives the max."""
    if not p >= 1.0:
        raise ValueError(f"lp_norm: need p >= 1, got {p}")
    peak, mag = _scaled_magnitude(u)
    if peak == 0.0:
        return 0.0
    return peak * _lp_of_scaled(mag, p, u.grid.cell_volume)


def lp_norms(u, p_grid):
    """Vector of ||u||_p over ``p_grid`` (one magnitude evaluation)."""
    peak, mag = _scaled_magnitude(u)
    if peak == 0.0:
        return np.zeros(len(p_grid))
    for p in p_grid:
        if not p >= 1.0:
            raise ValueError(f"lp_norm: need p >= 1, got {p}")
    vol = u.grid.cell_volume
    return np.array([peak * _lp_of_scaled(mag, p, vol) for p in p_grid])


def component_lp_norms(u, p):
    """Per-component norms ||u_k||_p (the component-wise vector convention)."""
    if not p >= 1.0:
        raise ValueError(f"lp_norm: need p >= 1, got {p}")
    out = []
    for comp in u.components:
        peak = float(np.max(np.abs(comp)))
        if peak == 0.0:
            out.append(0.0)
        else:
            out.append(peak * _lp_of_scaled(np.abs(comp) / peak, p, u.grid.cell_volume))
    return np.array(out)


def lp_norm_ratio(u, p, q):
    """||u||_p / ||u||_q computed without forming either norm's scale."""
    peak, mag = _scaled_magnitude(u)
    if peak == 0.0:
        raise ValueError("lp_norm_ratio: zero field")
    vol = u.grid.cell_volume
    return _lp_of_scaled(mag, p, vol) / _lp_of_scaled(mag, q, vol)


def w_ratio(u, grad, p):
    """W_{d,p}(u) / ||u||_p^p; finite even when W itself underflows."""
    if not p >= 2.0:
        raise ValueError(f"w_functional: need p >= 2, got {p}")
    grad = np.asarray(grad)
    peak, mag = _scaled_magnitude(u)
    if peak == 0.0:
        return 0.0
    g2 = np.sum((grad / peak) ** 2, axis=(0, 1))
    num = np.sum(mag ** (p - 2.0) * g2)
    den = np.sum(mag**p)
    return float(num / den)


def w_functional(u, grad, p):
    """W_{d,p}(u) = integral of |u|^(p-2) |grad u|^2.

    ``grad[m, i]`` holds d u_i / d x_m, as returned by ``spectral.gradient``.
    """
    if not p >= 2.0:
        raise ValueError(f"w_functional: need p >= 2, got {p}")
    grad = np.asarray(grad)
    peak, mag = _scaled_magnitude(u)
    if peak == 0.0:
        return 0.0
    g2 = np.sum((grad / peak) ** 2, axis=(0, 1))
    integral = float(np.sum(mag ** (p - 2.0) * g2) * u.grid.cell_volume)
    return math.exp(p * math.log(peak) + math.log(integral)) if integral > 0 else 0.0


def w_profile(u, grad, p_grid):
    """(W, W / ||u||_p^p) over ``p_grid``, sharing one magnitude and gradient pass."""
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any(p_grid < 2.0):
        raise ValueError("w_functional: need p >= 2")
    peak, mag = _scaled_magnitude(u)
    if peak == 0.0:
        return np.zeros(p_grid.shape), np.zeros(p_grid.shape)
    g2 = np.sum((np.asarray(grad) / peak) ** 2, axis=(0, 1)).ravel()
    mag = mag.ravel()
    W = np.empty(p_grid.shape)
    Wrel = np.empty(p_grid.shape)
    for j, p in enumerate(p_grid):
        base = mag ** (p - 2.0)
        num = float(base @ g2)
        den = float(base @ (mag * mag))
        Wrel[j] = num / den
        W[j] = math.exp(p * math.log(peak) + math.log(num * u.grid.cell_volume)) if num > 0 else 0.0
    return W, Wrel


def dilate(u, lam):
    """T_lam[u](x) = lam u(lam x): same samples, box L / lam, amplitude lam."""
    if not lam > 0:
        raise ValueError(f"dilate: need lam > 0, got {lam}")
    grid = Grid(u.grid.d, u.grid.n, u.grid.L / lam)
    return VectorField(grid, lam * u.components, u.time_tag)


@dataclass
class NormTimeSeries:
    """Sampled trajectory of norms.  ``lp_values[k, j]`` = ||u(t_k)||_{p_j}.

    ``W_rel_values`` stores W_{d,p}/||u||_p^p, which stays representable for
    the tiny amplitudes used in small-data runs.
    """

    times: np.ndarray
    p_grid: np.ndarray
    lp_values: np.ndarray
    l2_values: np.ndarray
    W_values: Optional[np.ndarray] = None
    W_rel_values: Optional[np.ndarray] = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.p_grid = np.asarray(self.p_grid, dtype=float)
        self.lp_values = np.asarray(self.lp_values, dtype=float).reshape(len(self.times), len(self.p_grid))
        self.l2_values = np.asarray(self.l2_values, dtype=float)
        if self.l2_values.shape != self.times.shape:
            raise ValueError("NormTimeSeries: l2_values length must match times")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("NormTimeSeries: times must be strictly increasing")
        for name in ("W_values", "W_rel_values"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=float)
                if val.shape != self.lp_values.shape:
                    raise ValueError(f"NormTimeSeries: {name} shape {val.shape} != {self.lp_values.shape}")
                setattr(self, name, val)
        if np.any(self.lp_values < 0) or np.any(self.l2_values < 0):
            raise ValueError("NormTimeSeries: norms must be nonnegative")

    def column(self, p):
        idx = np.flatnonzero(np.isclose(self.p_grid, p, rtol=0, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"p = {p} not sampled (grid: {self.p_grid.tolist()})")
        return int(idx[0])

    def lp(self, p):
        return self.lp_values[:, self.column(p)]

    def to_csv(self, fh=None):
        """Long-format CSV with columns t, p, lp, l2, W; returns text if fh is None."""
        out = io.StringIO() if fh is None else fh
        out.write("t,p,lp,l2,W\n")
        for k, t in enumerate(self.times):
            for j, p in enumerate(self.p_grid):
                w = "" if self.W_values is None else _fmt(self.W_values[k, j])
                out.write(f"{_fmt(t)},{_fmt(p)},{_fmt(self.lp_values[k, j])},{_fmt(self.l2_values[k])},{w}\n")
        if fh is None:
            return out.getvalue()
        return None


def _fmt(x):
    return format(float(x), ".17g")


def mixed_norm(series, p, r):
    """(int ||u(t)||_p^r dt)^(1/r) by the trapezoid rule over the sampled times."""
    if not r >= 1.0:
        raise ValueError(f"mixed_norm: need r >= 1, got {r}")
    vals = series.lp(p)
    peak = float(vals.max()) if vals.size else 0.0
    if peak == 0.0 or len(vals) < 2:
        return 0.0
    integral = np.trapezoid((vals / peak) ** r, series.times)
    return peak * float(integral) ** (1.0 / r)


def boundary_leakage(u):
    """Peak magnitude on the outer shell of the box relative to the global peak."""
    peak = u.max_magnitude()
    if peak == 0.0:
        return 0.0
    mag = u.magnitude()
    shell = 0.0
    for axis in range(u.d):
        for idx in (0, -1):
            shell = max(shell, float(np.take(mag, idx, axis=axis).max()))
    return shell / peak


def make_initial(kind, grid, amplitude=1.0, seed=0, band=(1.0, 3.0), width=None):
    """Divergence-free initial data.

    kinds: ``taylor-green-2d``, ``taylor-green-3d`` (unit box wavenumber),
    ``random-solenoidal`` (Gaussian noise restricted to the wavenumber shell
    ``band`` and projected; rms magnitude normalised to 1 before scaling),
    ``gaussian-bump`` (rotated gradient of a Gaussian centred in the box,
    standard deviation ``width``, default L/16).
    """
    if not amplitude > 0:
        raise ValueError(f"make_initial: amplitude must be > 0, got {amplitude}")
    k0 = 2.0 * math.pi / grid.L
    if kind == "taylor-green-2d":
        if grid.d != 2:
            raise ValueError("taylor-green-2d needs d = 2")
        x, y = grid.coords()
        comps = np.stack([np.sin(k0 * x) * np.cos(k0 * y), -np.cos(k0 * x) * np.sin(k0 * y)])
    elif kind == "taylor-green-3d":
        if grid.d != 3:
            raise ValueError("taylor-green-3d needs d = 3")
        x, y, z = grid.coords()
        comps = np.stack(
            [
                np.sin(k0 * x) * np.cos(k0 * y) * np.cos(k0 * z),
                -np.cos(k0 * x) * np.sin(k0 * y) * np.cos(k0 * z),
                np.zeros(grid.shape),
            ]
        )
    elif kind == "random-solenoidal":
        from . import spectral

        lo, hi = band
        if not 0 < lo <= hi < grid.n / 3:
            raise ValueError(f"random-solenoidal: band must satisfy 0 < lo <= hi < n/3, got {band}")
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal((grid.d,) + grid.shape)
        kmag = np.sqrt(sum(k**2 for k in spectral.integer_wavevectors(grid)))
        mask = (kmag >= lo) & (kmag <= hi)
        uh = spectral.forward(VectorField(grid, noise))
        uh = spectral.SpectralField(grid, uh.coefficients * mask)
        comps = spectral.inverse(spectral.leray_project(uh)).components
        rms = math.sqrt(float(np.mean(np.sum(comps**2, axis=0))))
        comps = comps / rms
    elif kind == "gaussian-bump":
        from . import spectral

        sigma = grid.L / 16.0 if width is None else float(width)
        xs = grid.coords()
        c = grid.L / 2.0
        r2 = sum((x - c) ** 2 for x in xs)
        phi = np.exp(-r2 / (2.0 * sigma**2))
        # u = sigma * (d_y phi, -d_x phi, 0), derivatives taken spectrally so the
        # discrete divergence vanishes identically
        dphi = spectral.gradient(spectral.forward_scalar(grid, phi))
        dphi_dx = spectral.to_physical(dphi[0])[0]
        dphi_dy = spectral.to_physical(dphi[1])[0]
        comps = [sigma * dphi_dy, -sigma * dphi_dx] + [np.zeros(grid.shape)] * (grid.d - 2)
        comps = np.stack(comps)
    else:
        raise ValueError(f"unknown initial kind {kind!r}; expected one of {INITIAL_KINDS}")
    return VectorField(grid, amplitude * comps, 0.0)


# -- snapshot files --------------------------------------------------------

_HEADER_RE = re.compile(
    rb"NSGLS1 d=(?P<d>\d+) n=(?P<n>\d+) L=(?P<L>\S+) t=(?P<t>\S+) comps=(?P<comps>\d+)\n"
)


class SnapshotError(ValueError):
    """Malformed snapshot; ``offset`` is the byte position of the problem."""

    def __init__(self, msg, offset):
        super().__init__(f"{msg} (byte offset {offset})")
        self.offset = offset


def write_snapshot(path, u):
    t = 0.0 if u.time_tag is None else float(u.time_tag)
    g = u.grid
    header = f"NSGLS1 d={g.d} n={g.n} L={float(g.L)!r} t={t!r} comps={g.d}\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(u.components, dtype="<f8").tobytes(order="C"))


def read_snapshot(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    nl = raw.find(b"\n")
    if nl < 0:
        raise SnapshotError("missing header line terminator", len(raw))
    header = raw[: nl + 1]
    if not header.startswith(b"NSGLS1 "):
        raise SnapshotError("bad magic, expected 'NSGLS1 '", 0)
    m = _HEADER_RE.fullmatch(header)
    if m is None:
        raise SnapshotError(f"malformed header {header[:-1]!r}", 0)
    try:
        d = int(m["d"])
        n = int(m["n"])
        L = float(m["L"])
        t = float(m["t"])
        comps = int(m["comps"])
    except ValueError as exc:
        raise SnapshotError(f"bad header value: {exc}", 0) from None
    if comps != d:
        raise SnapshotError(f"comps={comps} must equal d={d}", m.start("comps"))
    try:
        grid = Grid(d, n, L)
    except ValueError as exc:
        raise SnapshotError(str(exc), 0) from None
    count = d * n**d
    body = raw[nl + 1 :]
    if len(body) != 8 * count:
        raise SnapshotError(f"payload holds {len(body)} bytes, expected {8 * count}", nl + 1 + min(len(body), 8 * count))
    data = np.frombuffer(body, dtype="<f8").astype(np.float64).reshape((d,) + grid.shape)
    bad = np.flatnonzero(~np.isfinite(data.ravel()))
    if bad.size:
        raise SnapshotError("non-finite sample", nl + 1 + 8 * int(bad[0]))
    return VectorField(grid, data, t)
