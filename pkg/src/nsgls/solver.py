"""Integrator for the Leray-projected Navier-Stokes system on the periodic box.

Unit viscosity.  The state is advanced in Fourier space with a two-stage
integrating-factor scheme: the heat semigroup is applied exactly and the
projected convection term -Q div(u x u) is treated by a Heun-type
predictor/corrector, which is a second-order quadrature of the Duhamel
integral over one step.
"""

from __future__ import annotations

import logging
import math
import os
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Tuple

import numpy as np
import scipy.fft
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from . import field as fld
from . import spectral
from .field import Grid, NormTimeSeries, VectorField

__all__ = [
    "InitialSpec",
    "ForcingSpec",
    "SimulationConfig",
    "SolverError",
    "RunResult",
    "load_config",
    "config_errors",
    "initial_field",
    "nonlinear_term",
    "pressure",
    "step",
    "measure",
    "run",
    "picard",
    "CFL_LIMIT",
    "BLOWUP_FACTOR",
]

log = logging.getLogger(__name__)

CFL_LIMIT = 0.5
BLOWUP_FACTOR = 10.0
_MAX_HALVINGS = 12
# divergence guard, relative to max|u| * max|xi|
_DIV_RTOL = 1e-9


class InitialSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["taylor-green-2d", "taylor-green-3d", "random-solenoidal", "gaussian-bump"]
    amplitude: float = Field(1.0, gt=0)
    seed: Optional[int] = None
    band: Tuple[float, float] = (1.0, 3.0)
    width: Optional[float] = Field(None, gt=0)
    # rescale after generation so that ||u0||_p equals value
    target_norm: Optional[Tuple[float, float]] = None


class ForcingSpec(BaseModel):
    """Steady Kolmogorov forcing f = amplitude * sin(mode * 2 pi y / L) e_x."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["kolmogorov"] = "kolmogorov"
    amplitude: float = 1.0
    mode: int = Field(1, ge=1)


class SimulationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    d: int
    n: int
    L: float = Field(2.0 * math.pi, gt=0)
    dt: float = Field(gt=0)
    T: float = Field(ge=0)
    initial: InitialSpec
    forcing: Optional[ForcingSpec] = None
    sample_every: int = Field(1, ge=1)
    p_grid: List[float] = Field(default_factory=lambda: [2.0, 3.0, 4.0, 5.0, 6.0])
    snapshot_every: Optional[int] = Field(None, ge=1)
    seed: int = 0

    @field_validator("d")
    @classmethod
    def _dim(cls, v):
        if v not in (2, 3):
            raise ValueError("d must be 2 or 3")
        return v

    @field_validator("n")
    @classmethod
    def _points(cls, v):
        if v < 8 or v & (v - 1):
            raise ValueError("n must be a power of two >= 8")
        return v

    @field_validator("p_grid")
    @classmethod
    def _exponents(cls, v):
        if not v:
            raise ValueError("p_grid must be non-empty")
        if any(not p >= 1 for p in v):
            raise ValueError("every p must be >= 1")
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError("p_grid must be strictly increasing")
        return v

    @model_validator(mode="after")
    def _horizon(self):
        if self.T > 0:
            if self.T < self.dt:
                raise ValueError("T must be 0 or >= dt")
            steps = self.T / self.dt
            if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
                raise ValueError("T must be an integer multiple of dt")
        return self

    @property
    def grid(self):
        return Grid(self.d, self.n, self.L)

    @property
    def nsteps(self):
        return int(round(self.T / self.dt))


def config_errors(exc):
    """Field-by-field messages from a pydantic ValidationError."""
    return [f"{'.'.join(str(x) for x in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors()]


def load_config(source):
    """SimulationConfig from a JSON path, JSON text, or dict."""
    if isinstance(source, SimulationConfig):
        return source
    if isinstance(source, dict):
        return SimulationConfig.model_validate(source)
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            return SimulationConfig.model_validate_json(fh.read())
    return SimulationConfig.model_validate_json(source)


class SolverError(RuntimeError):
    """Numerical failure; ``result`` carries the partial run when available."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


def initial_field(config):
    spec = config.initial
    seed = config.seed if spec.seed is None else spec.seed
    kw = dict(seed=seed, band=spec.band, width=spec.width)
    if spec.target_norm is None:
        return fld.make_initial(spec.kind, config.grid, spec.amplitude, **kw)
    p, value = spec.target_norm
    if not value > 0:
        raise ValueError("target_norm value must be > 0")
    # regenerate at the target amplitude rather than rescaling, so tiny targets stay exact
    unit = fld.lp_norm(fld.make_initial(spec.kind, config.grid, 1.0, **kw), p)
    return fld.make_initial(spec.kind, config.grid, value / unit, **kw)


class _Dynamics:
    """Fourier-space right-hand side, cached per grid."""

    def __init__(self, grid, forcing=None):
        self.grid = grid
        _, self.xi, self.ksq, _ = spectral.wavenumbers(grid)
        self.keep = spectral.dealias_mask(grid)
        self.xi_max = 2.0 * math.pi / grid.L * (grid.n // 2)
        self.forcing_hat = None
        if forcing is not None:
            x = grid.coords()
            k0 = 2.0 * math.pi / grid.L
            f = np.zeros((grid.d,) + grid.shape)
            f[0] = forcing.amplitude * np.sin(forcing.mode * k0 * x[1])
            self.forcing_hat = spectral.forward(VectorField(grid, f)).coefficients

    def nonlinear(self, uh):
        """(-Q div(u x u) [+ Q f])^, dealiased, and max|u| of the dealiased field."""
        g = self.grid
        d = g.d
        axes = tuple(range(1, d + 1))
        workers = spectral._workers()
        u = scipy.fft.ifftn(uh * self.keep, axes=axes, workers=workers).real
        peak = float(np.max(np.sqrt(np.sum(u**2, axis=0))))
        out = np.zeros_like(uh)
        if peak == 0.0 and self.forcing_hat is None:
            return out, 0.0
        for i in range(d):
            for j in range(i, d):
                prod = scipy.fft.fftn(u[i] * u[j], workers=workers) * self.keep
                out[i] -= 1j * self.xi[j] * prod
                if j != i:
                    out[j] -= 1j * self.xi[i] * prod
        if self.forcing_hat is not None:
            out = out + self.forcing_hat
        inv = np.divide(1.0, self.ksq_odd, out=np.zeros_like(self.ksq_odd), where=self.ksq_odd > 0)
        xi_dot = sum(self.xi[m] * out[m] for m in range(d)) * inv
        for i in range(d):
            out[i] -= self.xi[i] * xi_dot
        return out, peak

    @property
    def ksq_odd(self):
        return spectral.wavenumbers(self.grid)[3]

    def heat(self, uh, t):
        return uh * np.exp(-self.ksq * t)

    def step(self, uh, dt):
        """One integrating-factor Heun step; returns (new uh, max|u| at start)."""
        e = np.exp(-self.ksq * dt)
        n0, peak = self.nonlinear(uh)
        pred = e * (uh + dt * n0)
        n1, _ = self.nonlinear(pred)
        return e * uh + 0.5 * dt * (e * n0 + n1), peak


def _check_solenoidal(u):
    peak = u.max_magnitude()
    if peak == 0.0:
        return
    scale = peak * 2.0 * math.pi / u.grid.L * (u.grid.n // 2)
    div = spectral.max_divergence(u)
    if div > _DIV_RTOL * scale:
        raise ValueError(f"input field is not solenoidal: max|div u| = {div:.3e} (scale {scale:.3e})")


def nonlinear_term(u, forcing=None):
    """Projected convection -Q div(u x u) (plus Q f when ``forcing`` is given)."""
    _check_solenoidal(u)
    dyn = _Dynamics(u.grid, forcing)
    nh, _ = dyn.nonlinear(spectral.forward(u).coefficients)
    return spectral.inverse(spectral.SpectralField(u.grid, nh), u.time_tag)


def pressure(u):
    """P = sum_jk R_j R_k (u_j u_k) with dealiased products; mean-zero scalar."""
    g = u.grid
    uh = spectral.dealias(spectral.forward(u))
    phys = spectral.to_physical(uh)
    total = np.zeros(g.shape, dtype=complex)
    for j in range(g.d):
        for k in range(g.d):
            prod = spectral.dealias(spectral.forward_scalar(g, phys[j] * phys[k]))
            total += spectral.riesz(spectral.riesz(prod, k), j).coefficients[0]
    total.flat[0] = 0.0
    return spectral.to_physical(spectral.SpectralField(g, total[None]))[0]


def step(u, dt, forcing=None):
    """Advance ``u`` by one step of size ``dt`` (no CFL adaptation)."""
    if not dt > 0:
        raise ValueError(f"step: need dt > 0, got {dt}")
    dyn = _Dynamics(u.grid, forcing)
    uh = spectral.forward(u).coefficients
    new, peak = dyn.step(uh, dt)
    out = spectral.inverse(spectral.SpectralField(u.grid, new), None if u.time_tag is None else u.time_tag + dt)
    if peak > 0 and out.max_magnitude() > BLOWUP_FACTOR * peak:
        raise SolverError("resolution/timestep failure: max|u| grew more than 10x in one step")
    return out


def measure(u, p_grid):
    """(lp norms, l2 norm, W values, W / ||u||_p^p) at one instant."""
    p_grid = np.asarray(p_grid, dtype=float)
    lp = fld.lp_norms(u, p_grid)
    l2 = fld.lp_norm(u, 2.0)
    W = np.full(p_grid.shape, np.nan)
    Wrel = np.full(p_grid.shape, np.nan)
    if u.max_magnitude() == 0.0:
        W[p_grid >= 2] = 0.0
        Wrel[p_grid >= 2] = 0.0
        return lp, l2, W, Wrel
    grad = spectral.physical_gradient(u)
    sel = p_grid >= 2
    W[sel], Wrel[sel] = fld.w_profile(u, grad, p_grid[sel])
    return lp, l2, W, Wrel


@dataclass
class RunResult:
    config: SimulationConfig
    series: NormTimeSeries
    initial: VectorField
    final: VectorField
    snapshots: list = field(default_factory=list)
    failed: bool = False
    message: str = ""


def run(config, outdir=None, keep_fields=False):
    """Integrate ``config`` and sample norms every ``sample_every`` steps.

    Returns a RunResult.  On a numerical failure the partial series is kept,
    ``failed`` is set, and no exception escapes.
    """
    config = load_config(config)
    if outdir is not None and config.snapshot_every:
        os.makedirs(outdir, exist_ok=True)
    grid = config.grid
    dyn = _Dynamics(grid, config.forcing)
    u0 = initial_field(config)
    p_grid = np.asarray(config.p_grid, dtype=float)

    times, lps, l2s, Ws, Wrels = [], [], [], [], []
    diag = {"cfl_history": [], "max_divergence": 0.0, "max_abs_mean": 0.0, "substeps": 0,
            "boundary_leakage_initial": fld.boundary_leakage(u0), "fields": []}
    snapshots = []
    amp_scale = max(u0.max_magnitude(), 1e-300)
    xi_max = 2.0 * math.pi / grid.L * (grid.n // 2)

    def sample(u, t, k):
        lp, l2, W, Wrel = measure(u, p_grid)
        times.append(t)
        lps.append(lp)
        l2s.append(l2)
        Ws.append(W)
        Wrels.append(Wrel)
        diag["max_divergence"] = max(diag["max_divergence"], spectral.max_divergence(u) / (amp_scale * xi_max))
        diag["max_abs_mean"] = max(diag["max_abs_mean"], float(np.max(np.abs(u.mean()))) / amp_scale)
        if keep_fields:
            diag["fields"].append(u)
        if outdir is not None and config.snapshot_every and k % config.snapshot_every == 0:
            path = os.path.join(outdir, f"snapshot_{k:06d}.nsgls")
            fld.write_snapshot(path, VectorField(u.grid, u.components, t))
            snapshots.append(path)

    uh = spectral.forward(u0).coefficients
    sample(u0, 0.0, 0)
    failed, message = False, ""
    u = u0
    dt = config.dt
    t = 0.0
    for k in range(1, config.nsteps + 1):
        peak_before = float(np.max(np.sqrt(np.sum(spectral.to_physical(spectral.SpectralField(grid, uh)) ** 2, axis=0))))
        m = 1
        while dt / m * peak_before * grid.n / grid.L > CFL_LIMIT and m < 2**_MAX_HALVINGS:
            m *= 2
        cfl = dt / m * peak_before * grid.n / grid.L
        diag["cfl_history"].append(cfl)
        if cfl > CFL_LIMIT:
            failed, message = True, f"CFL {cfl:.3g} above {CFL_LIMIT} after {_MAX_HALVINGS} halvings at step {k}"
            break
        diag["substeps"] += m - 1
        for _ in range(m):
            uh, _ = dyn.step(uh, dt / m)
        t = k * dt
        peak_after = float(np.max(np.sqrt(np.sum(spectral.to_physical(spectral.SpectralField(grid, uh)) ** 2, axis=0))))
        if not np.isfinite(peak_after) or (peak_before > 0 and peak_after > BLOWUP_FACTOR * peak_before):
            failed, message = True, f"resolution/timestep failure at step {k} (t = {t:.6g})"
            break
        if k % config.sample_every == 0 or k == config.nsteps:
            u = spectral.inverse(spectral.SpectralField(grid, uh), t)
            sample(u, t, k)
    if not failed:
        u = spectral.inverse(spectral.SpectralField(grid, uh), t)
    if failed:
        log.warning(message)

    fields = diag.pop("fields")
    series = NormTimeSeries(
        times=np.array(times), p_grid=p_grid, lp_values=np.array(lps), l2_values=np.array(l2s),
        W_values=np.array(Ws), W_rel_values=np.array(Wrels), diagnostics=diag,
    )
    if keep_fields:
        series.diagnostics["fields"] = fields
    return RunResult(config, series, u0, u, snapshots, failed, message)


def picard(u0, T, nodes=16, iterations=5, forcing=None):
    """Fixed-point iteration of the Duhamel formula on [0, T].

    Time integrals use the trapezoid rule on ``nodes`` + 1 equispaced nodes.
    Returns (u(T), list of successive max-norm updates at T).
    """
    if iterations > 5 or iterations < 1:
        raise ValueError("picard: iterations must be in 1..5")
    grid = u0.grid
    dyn = _Dynamics(grid, forcing)
    ts = np.linspace(0.0, T, nodes + 1)
    u0h = spectral.forward(u0).coefficients
    free = [dyn.heat(u0h, t) for t in ts]
    current = list(free)
    updates = []
    for _ in range(iterations):
        N = [dyn.nonlinear(c)[0] for c in current]
        new = [free[0]]
        for m in range(1, len(ts)):
            w = np.full(m + 1, ts[1] - ts[0])
            w[0] *= 0.5
            w[-1] *= 0.5
            acc = sum(w[j] * dyn.heat(N[j], ts[m] - ts[j]) for j in range(m + 1))
            new.append(free[m] + acc)
        diff = spectral.to_physical(spectral.SpectralField(grid, new[-1] - current[-1]))
        updates.append(float(np.max(np.abs(diff))))
        current = new
    return spectral.inverse(spectral.SpectralField(grid, current[-1]), T), updates
