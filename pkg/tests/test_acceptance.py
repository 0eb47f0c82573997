"""Acceptance criteria 1-7, one printed PASS/FAIL line per criterion.

Tolerances are pinned to the published acceptance thresholds; each criterion
collects its sub-checks and fails if any of them fails.
"""

import math
import time

import numpy as np
import pytest
from scipy import integrate

from nsgls import constants as C
from nsgls import field as fld
from nsgls import psi as P
from nsgls import solver, spectral, verify
from nsgls.field import Grid, VectorField
from nsgls.specfun import double_factorial, gamma

TWO_PI = 2.0 * math.pi


class Criterion:
    def __init__(self, number, title, lines):
        self.number = number
        self.title = title
        self.lines = lines
        self.checks = []
        self.start = time.perf_counter()

    def check(self, name, ok, detail=""):
        self.checks.append((name, bool(ok), detail))

    def finish(self, budget_s, extra_s=0.0):
        elapsed = time.perf_counter() - self.start + extra_s
        self.check(f"runtime < {budget_s:g} s", elapsed < budget_s, f"{elapsed:.1f} s")
        failed = [c for c in self.checks if not c[1]]
        status = "PASS" if not failed else "FAIL"
        summary = f"criterion {self.number} [{self.title}]: {status} ({len(self.checks) - len(failed)}/{len(self.checks)} checks)"
        if failed:
            summary += "; failing: " + "; ".join(f"{n} ({d})" for n, _, d in failed)
        self.lines[self.number] = summary
        print(summary)
        for name, ok, detail in self.checks:
            print(f"    {'ok  ' if ok else 'FAIL'} {name} {detail}")
        assert not failed, summary


def rel_err(a, b):
    return abs(a - b) / abs(b)


def test_criterion_1_constants(acceptance_lines):
    c = Criterion(1, "constants suite", acceptance_lines)
    worst = max(rel_err(gamma(d), math.factorial(d - 1)) for d in range(2, 13))
    c.check("Gamma(d) = (d-1)!", worst <= 1e-12, f"max rel err {worst:.1e}")
    worst = max(rel_err(gamma(d - 0.5), math.sqrt(math.pi) * double_factorial(2 * d - 3) / 2 ** (d - 1))
                for d in range(2, 13))
    c.check("Gamma(d - 1/2) = sqrt(pi) (2d-3)!! / 2^(d-1)", worst <= 1e-12, f"max rel err {worst:.1e}")

    target = (1.0 / 3.0) * (2.0 / math.pi**2) ** (1.0 / 3.0)
    ks = C.ks_sobolev(3, 2.0)
    c.check("K_S(3,2) = (1/3)(2/pi^2)^(1/3)", rel_err(ks, target) <= 1e-12,
            f"computed {ks:.12g}, target {target:.12g}, rel err {rel_err(ks, target):.3g}")

    worst = max(rel_err(C.ks_2d3_factorial(d), C.ks_2d3(d)) for d in range(3, 13))
    worst_general = max(rel_err(C.ks_sobolev(d, 2 * d / 3), C.ks_2d3(d)) for d in range(3, 13))
    c.check("K_S(d,2d/3) general/even/odd agreement", max(worst, worst_general) <= 1e-10,
            f"max rel err {max(worst, worst_general):.1e}")

    worst = 0.0
    for p in (1.5, 2.0, 3.0, 10.0):
        val, _ = integrate.quad(lambda t: t ** (-1.0 / p) / math.sqrt(1.0 + t * t), 0, np.inf, limit=500)
        worst = max(worst, rel_err(C.riesz_integral(p), val))
    c.check("I(p) vs quadrature", worst <= 1e-6, f"max rel err {worst:.1e}")

    exact = {2.0: 1.0, 4.0: 1 + math.sqrt(2), 4.0 / 3.0: 1 + math.sqrt(2)}
    worst = max(rel_err(C.pichorides_norm(p), v) for p, v in exact.items())
    c.check("Pichorides closed forms", worst <= 1e-12, f"max rel err {worst:.1e}")
    c.finish(1.0)


def _band_limited(grid, rng, kmax, ncomp):
    noise = rng.standard_normal((ncomp,) + grid.shape)
    coef = np.stack([spectral.forward_scalar(grid, comp).coefficients[0] for comp in noise])
    keep = np.ones(grid.shape, dtype=bool)
    for k in spectral.integer_wavevectors(grid):
        keep = keep & (np.abs(k) <= kmax)
    keep[(0,) * grid.d] = False
    return spectral.SpectralField(grid, coef * keep)


def test_criterion_2_spectral(acceptance_lines):
    c = Criterion(2, "spectral operator suite", acceptance_lines)
    rng = np.random.default_rng(2)
    g = Grid(3, 32, TWO_PI)

    phi = _band_limited(g, rng, 10, 1)
    grad = spectral.SpectralField(g, np.concatenate([x.coefficients for x in spectral.gradient(phi)]))
    leak = np.max(np.abs(spectral.to_physical(spectral.leray_project(grad)))) / np.max(np.abs(spectral.to_physical(grad)))
    c.check("Leray annihilates gradients", leak <= 1e-12, f"{leak:.1e}")
    uh = _band_limited(g, rng, 10, 3)
    q = spectral.leray_project(uh)
    idem = np.max(np.abs(spectral.leray_project(q).coefficients - q.coefficients)) / np.max(np.abs(q.coefficients))
    c.check("Leray idempotent", idem <= 1e-12, f"{idem:.1e}")
    sol = spectral.forward(fld.make_initial("random-solenoidal", g, seed=3))
    ident = np.max(np.abs(spectral.leray_project(sol).coefficients - sol.coefficients)) / np.max(np.abs(sol.coefficients))
    c.check("Leray identity on solenoidal fields", ident <= 1e-12, f"{ident:.1e}")

    worst = 0.0
    x = g.coords()
    for k in [(1, 0, 0), (2, -3, 1), (5, 5, -7), (0, 4, 9)]:
        f = np.cos(sum(kk * xx for kk, xx in zip(k, x)))
        fh = spectral.forward_scalar(g, f)
        kn = math.sqrt(sum(kk * kk for kk in k))
        for j in range(3):
            out = spectral.to_physical(spectral.riesz(fh, j))[0]
            worst = max(worst, abs(np.max(np.abs(out)) / np.max(np.abs(f)) - abs(k[j]) / kn))
    c.check("Riesz single-mode ratios", worst <= 1e-12, f"max abs err {worst:.1e}")

    zero = np.zeros(g.shape)
    ratio = {2.0: 0.0, 3.0: 0.0, 4.0: 0.0}
    for _ in range(50):
        fh = _band_limited(g, rng, 6, 1)
        f = VectorField(g, np.stack([spectral.to_physical(fh)[0], zero, zero]))
        for j in range(3):
            rf = VectorField(g, np.stack([spectral.to_physical(spectral.riesz(fh, j))[0], zero, zero]))
            for p in ratio:
                ratio[p] = max(ratio[p], fld.lp_norm(rf, p) / fld.lp_norm(f, p))
    ok = all(ratio[p] <= C.pichorides_norm(p) * (1 + 1e-6) for p in ratio)
    c.check("||R_j f||_p / ||f||_p <= cot(pi/2p*)", ok,
            ", ".join(f"p={p:g}: {ratio[p]:.4f}/{C.pichorides_norm(p):.4f}" for p in ratio))

    gh = Grid(3, 64, 20.0)
    s, t = 0.5, 0.5
    r2 = sum((xx - gh.L / 2) ** 2 for xx in gh.coords())
    exact = (s / (s + t)) ** 1.5 * np.exp(-r2 / (4 * (s + t)))
    out = spectral.to_physical(spectral.heat_semigroup(spectral.forward_scalar(gh, np.exp(-r2 / (4 * s))), t))[0]
    err = math.sqrt(np.sum((out - exact) ** 2) / np.sum(exact**2))
    c.check("heat semigroup Gaussian closed form", err <= 1e-6, f"rel L2 err {err:.1e}")
    c.finish(60.0)


@pytest.mark.slow
def test_criterion_3_solver(acceptance_lines):
    c = Criterion(3, "solver oracle suite", acceptance_lines)
    tg = solver.SimulationConfig(d=2, n=128, dt=1e-3, T=1.0, initial=solver.InitialSpec(kind="taylor-green-2d"),
                                 sample_every=1000, p_grid=[2.0])
    s = solver.run(tg).series
    err = rel_err(s.l2_values[-1], math.exp(-2.0) * s.l2_values[0])
    c.check("2-D Taylor-Green decay at t=1", err <= 1e-6, f"rel err {err:.1e}")

    base = dict(d=3, n=16, T=0.5, p_grid=[2.0], sample_every=1000,
                initial=solver.InitialSpec(kind="taylor-green-3d", amplitude=2.0))
    ref = solver.run(solver.SimulationConfig(dt=0.5 / 1600, **base)).final
    errs = [np.max(np.abs(solver.run(solver.SimulationConfig(dt=dt, **base)).final.components - ref.components))
            for dt in (0.05, 0.025, 0.0125)]
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    c.check("observed temporal order >= 1.8", np.all(orders >= 1.8), f"orders {np.round(orders, 3).tolist()}")

    run3 = solver.SimulationConfig(d=3, n=32, dt=0.005, T=0.25, sample_every=1, p_grid=[2.0],
                                   initial=solver.InitialSpec(kind="random-solenoidal", amplitude=3.0, seed=8))
    res = solver.run(run3, keep_fields=True)
    rise = float(np.max(np.diff(res.series.l2_values)))
    c.check("unforced 3-D energy nonincreasing per step", rise <= 1e-10, f"max rise {rise:.1e}")
    fields = res.series.diagnostics["fields"]
    div = max(spectral.max_divergence(u) for u in fields)
    mean = max(float(np.max(np.abs(u.mean()))) for u in fields)
    c.check("divergence <= 1e-10", div <= 1e-10, f"{div:.1e}")
    c.check("mean <= 1e-12", mean <= 1e-12, f"{mean:.1e}")
    c.finish(300.0)


def test_criterion_4_thm31(acceptance_lines, small_data_config, small_data_run, small_data_timing):
    c = Criterion(4, "small-data monotone decay", acceptance_lines)
    res = small_data_run
    d = 3
    norm_d = fld.lp_norm(res.initial, 3.0)
    level = min(C.threshold(d, p) for p in (4.0, 5.0, 6.0))
    c.check("||u0||_3 below min threshold over {4,5,6}", norm_d < level, f"{norm_d:.3e} < {level:.3e}")
    s = res.series
    worst = 0.0
    for j, p in enumerate(s.p_grid):
        v = s.lp_values[:, j]
        worst = max(worst, float(np.max(np.diff(v))) / v[0])
    c.check("every sampled ||u(t)||_p nonincreasing", worst <= 1e-8, f"max rise / ||u0||_p = {worst:.1e}")
    rep = verify.check_thm31(small_data_config, run=res)
    gaps = [m["violation"] for m in rep.margins if m.get("check")]
    c.check("sup_t GLS norm attained at t=0 within 1%", max(gaps) <= 0.01, f"gaps {gaps}")
    c.check("harness verdict", rep.status == "pass", rep.status)
    c.finish(600.0, extra_s=small_data_timing.get("run_seconds", 0.0))


def test_criterion_5_thm41(acceptance_lines, small_data_config, small_data_run):
    c = Criterion(5, "kappa-weighted GLS bound", acceptance_lines)
    rep = verify.check_thm41(small_data_config, psi_spec={"kind": "natural", "support": [2.0, 6.0], "closed_b": False},
                             run=small_data_run)
    c.check("psi support [2,6)", rep.diagnostics["psi_support"] == [2.0, 6.0])
    sup = max(m["ratio"] for m in rep.margins)
    c.check("sup_t sup_p ||u(t)||_p / psi_kappa(p) <= 1.05", sup <= 1.05, f"{sup:.6f}")
    c.check("harness verdict", rep.status == "pass", rep.status)
    c.finish(600.0)


def test_criterion_6_thm61(acceptance_lines, small_data_config, small_data_run):
    c = Criterion(6, "time-integrated bound", acceptance_lines)
    s = small_data_run.series
    decay = s.l2_values[-1] / s.l2_values[0]
    c.check("||u(T)||_2 <= 1e-3 ||u0||_2", decay <= 1e-3, f"{decay:.2e}")
    rep = verify.check_thm61(small_data_config, run=small_data_run)
    by_p = {m["p"]: m["ratio"] for m in rep.margins}
    ok = all(by_p[p] <= 1.05 for p in (4.0, 5.0, 6.0))
    c.check("finite-horizon integral / bound <= 1.05 at p in {4,5,6}", ok,
            ", ".join(f"p={p:g}: {by_p[p]:.4g}" for p in (4.0, 5.0, 6.0)))
    worst = 0.0
    for p in s.p_grid[s.p_grid > 3]:
        r = C.r_exponent(3, p)
        worst = max(worst, abs(2 / (p - 1) - (2 * p / (p - 3)) / r), abs((p - 3) / (p - 1) - p / r))
    c.check("exponent identity on the p-grid", worst <= 1e-12, f"{worst:.1e}")
    c.finish(600.0)


def test_criterion_7_norm_machinery(acceptance_lines, small_data_config, small_data_run):
    c = Criterion(7, "norm machinery suite", acceptance_lines)
    rng = np.random.default_rng(7)
    g = Grid(3, 16, TWO_PI)
    worst = 0.0
    for _ in range(100):
        f = VectorField(g, rng.standard_normal((3,) + g.shape) * rng.uniform(0.1, 10))
        n2, n6 = fld.lp_norm(f, 2.0), fld.lp_norm(f, 6.0)
        for p in (3.0, 4.0, 5.0):
            worst = max(worst, fld.lp_norm(f, p) / P.interpolation_Z(n2, n6, 2.0, 6.0, p))
    c.check("interpolation bound, slack 1e-12", worst <= 1 + 1e-12, f"max ratio {worst:.6f}")

    u = fld.make_initial("random-solenoidal", g, seed=5)
    worst = 0.0
    for lam in (0.5, 2.0, 3.0):
        v = fld.dilate(u, lam)
        for p in (2.5, 4.0, 6.0):
            k0 = P.kappa(fld.lp_norm(u, p), fld.lp_norm(u, 2.0), 3, p)
            k1 = P.kappa(fld.lp_norm(v, p), fld.lp_norm(v, 2.0), 3, p)
            worst = max(worst, abs(k1 - k0) / k0)
    c.check("kappa dilation invariance", worst <= 1e-8, f"max rel change {worst:.1e}")

    grid = np.array([2.0, 3.0, 4.0, 5.0, 6.0])
    prof = P.NormProfile.of_field(u, grid)
    exact = all(P.gls_norm(prof, P.PsiFunction.degenerate(r)) == fld.lp_norm(u, r) for r in grid)
    c.check("degenerate psi GLS norm equals L_r norm", exact)
    nat = P.gls_norm(prof, P.natural_psi(prof))
    c.check("natural psi GLS norm equals 1", abs(nat - 1) <= 1e-12, f"{nat!r}")

    r41 = verify.check_thm41(small_data_config, run=small_data_run)
    r51 = verify.check_thm51(small_data_config, flavor="sup", run=small_data_run)
    c.check("sup-weighted flavor reproduces the kappa-weighted check", r41.passed == r51.passed
            and abs(r51.margins[0]["ratio"] - r41.diagnostics["sup_ratio"]) <= 1e-12,
            f"{r41.status}/{r51.status}")
    c.finish(120.0)
