"""Theorem checks: run a simulation, measure norms, compare with the bounds.

Every check returns a VerificationReport with status ``pass``, ``fail``,
``hypothesis-not-met`` or ``numerical-failure``.  Upper-bound checks record
``ratio = observed / bound`` and pass when ratio <= 1 + upper tolerance.
Infinite-time quantities are evaluated on the simulated horizon [0, T]
with a tail estimate from the final decay rate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import constants
from . import field as fld
from . import psi as psimod
from . import solver
from .psi import EXCLUDED, NormProfile, PowerMean, SupWeighted

__all__ = [
    "Tolerances",
    "VerificationReport",
    "build_psi",
    "small_data_config",
    "check_thm31",
    "check_thm41",
    "check_thm51",
    "check_thm61",
    "check_inequalities",
    "THEOREMS",
    "MODEL_NOTE",
]

MODEL_NOTE = (
    "dynamics: du/dt = Laplace(u) - Q div(u (x) u) [+ Q f], unit viscosity, "
    "periodic box standing in for R^d; a single convection term with the standard sign"
)

PASS, FAIL, NOT_MET, NUMERICAL = "pass", "fail", "hypothesis-not-met", "numerical-failure"


@dataclass(frozen=True)
class Tolerances:
    upper: float = 0.05  # ratio <= 1 + upper
    monotone: float = 1e-8  # per-step rise / ||u0||_p
    sup_at_zero: float = 0.01  # relative gap for the sup-at-t=0 identity
    horizon_decay: float = 1e-3  # ||u(T)||_2 <= horizon_decay * ||u0||_2
    identity: float = 1e-12  # exponent identities
    interpolation: float = 1e-12  # Lyapunov slack


@dataclass
class VerificationReport:
    theorem: str
    status: str
    tolerances: dict
    margins: list
    diagnostics: dict
    config: dict

    @property
    def passed(self):
        return self.status == PASS

    def to_dict(self):
        out = asdict(self)
        out["pass"] = self.passed
        return _jsonable(out)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# -- presets and psi specs -------------------------------------------------


def small_data_config(d=3, n=32, p_small=(4.0, 5.0, 6.0), fraction=0.5, seed=0, band=(1.0, 3.0),
                      dt=0.02, T=8.0, sample_every=2, p_grid=None, L=2.0 * math.pi):
    """Random solenoidal data scaled to ``fraction`` of the smallest threshold
    over ``p_small``.  The default horizon brings ||u||_2 below 1e-3 of its
    start for shell band [1, 3] on the 2 pi box."""
    level = min(constants.threshold(d, p) for p in p_small)
    if p_grid is None:
        base = set(np.round(psimod.default_grid(2.0, 6.0, 33, include_b=True), 12).tolist())
        p_grid = sorted(base | {float(d), 4.0, 5.0} | {float(p) for p in p_small})
    return solver.SimulationConfig(
        d=d, n=n, L=L, dt=dt, T=T, sample_every=sample_every, p_grid=list(p_grid), seed=seed,
        initial=solver.InitialSpec(kind="random-solenoidal", band=band, target_norm=(float(d), fraction * level)),
    )


def build_psi(spec, u0, p_grid, default_support=None):
    """psi-function from a config spec.

    ``None`` or ``{"kind": "natural"}`` without ``fields`` means the natural
    function of ``u0``.  ``support`` = [a, b] and ``closed_b`` select the grid
    points used.
    """
    spec = dict(spec or {"kind": "natural"})
    kind = spec.get("kind")
    p_grid = np.asarray(p_grid, dtype=float)
    if kind == "degenerate":
        return psimod.PsiFunction.degenerate(float(spec["r"]))
    if kind == "table":
        return psimod.PsiFunction.table(spec["grid"], spec["values"])
    if kind == "interpolation":
        b = float(spec["b"])
        pts = p_grid[(p_grid >= 2.0) & (p_grid < b)]
        return psimod.psi_from_Lab(float(spec["y2"]), float(spec["yb"]), b, grid=pts if pts.size else None)
    if kind == "natural":
        a, b = spec.get("support", default_support or (float(p_grid[0]), float(p_grid[-1])))
        closed_b = bool(spec.get("closed_b", True))
        sel = (p_grid >= a) & ((p_grid <= b) if closed_b else (p_grid < b))
        pts = p_grid[sel]
        if pts.size == 0:
            raise ValueError("natural psi: no grid points inside the support")
        if spec.get("fields"):
            profs = [NormProfile.of_field(fld.read_snapshot(path), pts, source=str(path)) for path in spec["fields"]]
        else:
            profs = [NormProfile.of_field(u0, pts, source="u0")]
        return psimod.natural_psi(profs, a=float(a), b=float(b), closed_b=closed_b)
    raise ValueError(f"unknown psi kind {kind!r}")


# -- shared plumbing -------------------------------------------------------


def _obtain_run(config, run):
    if run is not None:
        return run
    return solver.run(config)


def _base_diagnostics(res):
    s = res.series
    cfl = s.diagnostics.get("cfl_history", [])
    g = res.config.grid
    return {
        "model": MODEL_NOTE,
        "grid": {"d": g.d, "n": g.n, "L": g.L, "p_points": int(s.p_grid.size)},
        "samples": int(s.times.size),
        "T": float(s.times[-1]),
        "boundary_leakage_initial": s.diagnostics.get("boundary_leakage_initial"),
        "cfl_max": float(max(cfl)) if cfl else 0.0,
        "cfl_substeps": s.diagnostics.get("substeps", 0),
        "max_divergence_rel": s.diagnostics.get("max_divergence"),
        "max_abs_mean_rel": s.diagnostics.get("max_abs_mean"),
        "l2_final_over_initial": float(s.l2_values[-1] / s.l2_values[0]) if s.l2_values[0] > 0 else 0.0,
        "solver_failed": res.failed,
        "solver_message": res.message,
    }


def _report(theorem, status, tol, margins, diag, res):
    return VerificationReport(theorem, status, asdict(tol), margins, diag,
                              res.config.model_dump(mode="json") if res is not None else {})


def _profile_at(series, k, grid_pts):
    try:
        idx = [series.column(p) for p in grid_pts]
    except KeyError as exc:
        raise ValueError(f"psi grid point not on the sampled p-grid: {exc.args[0]}") from None
    return NormProfile(np.asarray(grid_pts), series.lp_values[k, idx], source=f"t={series.times[k]:.6g}")


def _is_zero(res):
    return res.initial.max_magnitude() == 0.0


def _kappa_values(psi, u0, d):
    l2 = fld.lp_norm(u0, 2.0)
    out = []
    for p in psi.grid:
        if p <= 2.0 or l2 == 0.0:
            out.append(None)
        else:
            out.append(psimod.kappa(fld.lp_norm(u0, p), l2, d, p))
    return out


# -- Theorem checks ----------------------------------------------------------


def check_thm31(config, psi_spec=None, tolerances=Tolerances(), run=None):
    """Small data: norms in the threshold set decrease and the GLS sup sits at t = 0."""
    config = solver.load_config(config)
    d = config.d
    tol = tolerances
    if d < 3:
        return _report("3.1", NOT_MET, tol, [], {"reason": "theorem needs d >= 3"}, None)
    res = _obtain_run(config, run)
    diag = _base_diagnostics(res)
    if res.failed:
        return _report("3.1", NUMERICAL, tol, [], diag, res)
    s = res.series
    u0 = res.initial
    if _is_zero(res):
        margins = [{"p": float(p), "violation": 0.0} for p in s.p_grid]
        diag["note"] = "zero initial data; all norms vanish"
        return _report("3.1", PASS, tol, margins, diag, res)

    psi = build_psi(psi_spec, u0, s.p_grid)
    if psi(d) is EXCLUDED:
        diag["reason"] = f"d = {d} is not in supp psi"
        return _report("3.1", NOT_MET, tol, [], diag, res)
    norm_d = fld.lp_norm(u0, d)
    J = constants.threshold_mask(norm_d, d, psi.grid)
    diag["norm_d_initial"] = norm_d
    diag["thresholds"] = {f"{p:.6g}": constants.threshold(d, p) for p in psi.grid if p > d}
    diag["J"] = [float(p) for p, inside in zip(psi.grid, J) if inside]
    try:
        psi_t = psimod.psi_tilde(psi, J)
    except ValueError as exc:
        diag["reason"] = str(exc)
        return _report("3.1", NOT_MET, tol, [], diag, res)

    ok = True
    margins = []
    for p in psi_t.support_grid:
        v = s.lp(p)
        rise = float(np.max(np.diff(v), initial=0.0))
        violation = max(rise, 0.0) / v[0]
        margins.append({"p": float(p), "violation": violation})
        ok &= violation <= tol.monotone

    full = psi.support_grid
    g0 = psimod.gls_norm(_profile_at(s, 0, full), psi)
    sub = psi_t.support_grid
    gls_t = np.array([psimod.gls_norm(_profile_at(s, k, sub), psi_t) for k in range(s.times.size)])
    sup = float(gls_t.max())
    gap_identity = abs(sup - g0) / g0
    gap_at_zero = (sup - gls_t[0]) / sup
    margins.append({"p": None, "check": "sup_t GLS(psi~) vs GLS(u0, psi)", "violation": gap_identity})
    margins.append({"p": None, "check": "sup_t attained at t=0", "violation": gap_at_zero})
    ok &= gap_identity <= tol.sup_at_zero and gap_at_zero <= tol.sup_at_zero
    diag["gls_initial_psi"] = g0
    diag["gls_sup_psi_tilde"] = sup
    diag["psi_warnings"] = list(psi.warnings)
    return _report("3.1", PASS if ok else FAIL, tol, margins, diag, res)


def _thm41_setup(config, psi_spec, run, tol, theorem):
    config = solver.load_config(config)
    d = config.d
    if d < 3:
        return None, _report(theorem, NOT_MET, tol, [], {"reason": "theorem needs d >= 3"}, None)
    res = _obtain_run(config, run)
    diag = _base_diagnostics(res)
    if res.failed:
        return None, _report(theorem, NUMERICAL, tol, [], diag, res)
    s = res.series
    u0 = res.initial
    if _is_zero(res):
        diag["note"] = "zero initial data; all norms vanish"
        return None, _report(theorem, PASS, tol, [{"p": float(p), "ratio": 0.0} for p in s.p_grid], diag, res)
    spec = dict(psi_spec or {"kind": "natural"})
    if spec.get("kind") == "natural":
        spec.setdefault("support", (2.0, float(s.p_grid[-1])))
        spec.setdefault("closed_b", False)
    psi = build_psi(spec, u0, s.p_grid)
    b = psi.b
    diag["psi_support"] = [psi.a, psi.b]
    if not (psi.a == 2.0 and b > d):
        diag["reason"] = f"need supp psi = [2, b) with b > d; got [{psi.a}, {b})"
        return None, _report(theorem, NOT_MET, tol, [], diag, res)
    pts = psi.support_grid
    g0 = psimod.gls_norm(NormProfile.of_field(u0, pts), psi)
    diag["gls_initial"] = g0
    if g0 > 1.0 + 1e-12:
        diag["reason"] = f"u0 is not in the unit ball of G(psi): norm {g0:.6g}"
        return None, _report(theorem, NOT_MET, tol, [], diag, res)
    kap = _kappa_values(psi, u0, d)
    diag["kappa"] = {f"{p:.6g}": k for p, k in zip(psi.grid, kap) if k is not None}
    psi_k = psimod.psi_kappa(psi, kap, d)
    return (res, s, u0, psi, psi_k, kap, diag), None


def check_thm41(config, psi_spec=None, tolerances=Tolerances(), run=None):
    """sup_t sup_p ||u(t)||_p / psi_kappa(p) <= 1."""
    tol = tolerances
    setup, early = _thm41_setup(config, psi_spec, run, tol, "4.1")
    if early is not None:
        return early
    res, s, u0, psi, psi_k, kap, diag = setup
    margins = []
    ok = True
    for p in psi_k.support_grid:
        ratio = float(s.lp(p).max() / psi_k(p))
        margins.append({"p": float(p), "ratio": ratio})
        ok &= ratio <= 1.0 + tol.upper
    diag["sup_ratio"] = max(m["ratio"] for m in margins)
    return _report("4.1", PASS if ok else FAIL, tol, margins, diag, res)


def check_thm51(config, psi_spec=None, flavor=None, tolerances=Tolerances(), run=None):
    """<||u(t)||_.> <= <h0> for every sampled t, per auxiliary-norm flavor.

    ``flavor``: ``"sup"`` (weight psi_kappa), a PowerMean, or None for both.
    """
    tol = tolerances
    setup, early = _thm41_setup(config, psi_spec, run, tol, "5.1")
    if early is not None:
        return early
    res, s, u0, psi, psi_k, kap, diag = setup
    h0 = psimod.h_zero(psi, kap, res.config.d)
    flavors = {"sup": SupWeighted(psi_k), "mean-q2": PowerMean(2.0)}
    if flavor == "sup":
        flavors = {"sup": flavors["sup"]}
    elif isinstance(flavor, PowerMean):
        flavors = {f"mean-q{flavor.q:g}": flavor}
    pts = h0.grid
    margins = []
    ok = True
    for name, fl in flavors.items():
        bound = psimod.mri_norm(h0, fl)
        ratios = np.array([psimod.mri_norm(_profile_at(s, k, pts), fl) / bound for k in range(s.times.size)])
        k_max = int(np.argmax(ratios))
        margins.append({"flavor": name, "ratio": float(ratios[k_max]), "t": float(s.times[k_max]),
                        "bound": bound})
        ok &= ratios[k_max] <= 1.0 + tol.upper
    return _report("5.1", PASS if ok else FAIL, tol, margins, diag, res)


def _tail_fraction(times, vals, r):
    """Estimated share of int_0^inf v^r dt beyond the horizon (exponential tail)."""
    if vals[-1] <= 0 or vals[-2] <= 0:
        return 0.0
    rate = -(math.log(vals[-1]) - math.log(vals[-2])) / (times[-1] - times[-2])
    if rate <= 0:
        return float("inf")
    peak = vals.max()
    body = np.trapezoid((vals / peak) ** r, times)
    tail = (vals[-1] / peak) ** r / (r * rate)
    return float(tail / (body + tail))


def check_thm61(config, psi_spec=None, tolerances=Tolerances(), run=None):
    """Finite-horizon int ||u||_p^r(p) dt against the a-priori bound, and the
    mixed norm against theta_{d,psi}."""
    tol = tolerances
    config = solver.load_config(config)
    d = config.d
    if d < 3:
        return _report("6.1", NOT_MET, tol, [], {"reason": "theorem needs d >= 3"}, None)
    res = _obtain_run(config, run)
    diag = _base_diagnostics(res)
    if res.failed:
        return _report("6.1", NUMERICAL, tol, [], diag, res)
    s = res.series
    u0 = res.initial
    ps = [float(p) for p in s.p_grid if p > d]
    if not ps:
        diag["reason"] = "no sampled p > d"
        return _report("6.1", NOT_MET, tol, [], diag, res)
    if _is_zero(res):
        diag["note"] = "zero initial data; integrals vanish"
        return _report("6.1", PASS, tol, [{"p": p, "ratio": 0.0} for p in ps], diag, res)

    ok = True
    l2_decay = s.l2_values[-1] / s.l2_values[0]
    diag["horizon_adequate"] = bool(l2_decay <= tol.horizon_decay)
    ok &= diag["horizon_adequate"]

    spec = dict(psi_spec or {"kind": "natural"})
    if spec.get("kind") == "natural":
        spec.setdefault("support", (2.0, float(s.p_grid[-1])))
        spec.setdefault("closed_b", False)
    psi = build_psi(spec, u0, s.p_grid)
    diag["psi_support"] = [psi.a, psi.b]
    if not psi.b > d:
        diag["reason"] = f"need b > d; supp psi ends at {psi.b}"
        return _report("6.1", NOT_MET, tol, [], diag, res)

    norm_d = fld.lp_norm(u0, d)
    margins = []
    for p in ps:
        r = constants.r_exponent(d, p)
        vals = s.lp(p)
        mixed = fld.mixed_norm(s, p, r)
        norm_p = float(vals[0])
        log_bound = (math.log(constants.constant_B21(d, p) / p) + (2.0 * p / (p - d)) * math.log(norm_d)
                     + p * math.log(norm_p))
        ratio = math.exp(r * math.log(mixed) - log_bound) if mixed > 0 else 0.0
        tail = _tail_fraction(s.times, vals, r)
        entry = {"p": p, "r": r, "ratio": ratio, "tail_fraction": tail,
                 "ratio_with_tail": ratio / (1.0 - tail) if tail < 1 else float("inf")}
        ok &= ratio <= 1.0 + tol.upper
        if psi.contains(p) and psi.contains(d):
            th = psimod.theta(psi, d, p)
            entry["mixed_over_theta"] = mixed / th
            ok &= mixed / th <= 1.0 + tol.upper
            e1 = abs(2.0 / (p - d + 2.0) - (2.0 * p / (p - d)) / r)
            e2 = abs((p - d) / (p - d + 2.0) - p / r)
            entry["exponent_identity_error"] = max(e1, e2)
            ok &= max(e1, e2) <= tol.identity
        margins.append(entry)
    return _report("6.1", PASS if ok else FAIL, tol, margins, diag, res)


def check_inequalities(run=None, seed=0, n_fields=100, n_pairs=10_000, tolerances=Tolerances()):
    """Young-type inequality on random pairs, Lyapunov interpolation on random
    fields, and the two trajectory inequalities along a small-data run."""
    tol = tolerances
    rng = np.random.default_rng(seed)
    margins = []
    diag = {"model": MODEL_NOTE}
    ok = True

    # interpolation bound ||f||_p <= Z_{2,6}(||f||_2, ||f||_6; p)
    grid = fld.Grid(3, 16, 2.0 * math.pi)
    worst = {3.0: 0.0, 4.0: 0.0, 5.0: 0.0}
    for i in range(n_fields):
        comps = rng.standard_normal((3,) + grid.shape) * rng.uniform(0.1, 10.0)
        f = fld.VectorField(grid, comps)
        n2, n6 = fld.lp_norm(f, 2.0), fld.lp_norm(f, 6.0)
        for p in worst:
            worst[p] = max(worst[p], fld.lp_norm(f, p) / psimod.interpolation_Z(n2, n6, 2.0, 6.0, p))
    for p, w in worst.items():
        margins.append({"check": "interpolation (2,6)", "p": p, "ratio": w})
        ok &= w <= 1.0 + tol.interpolation

    # elementary Young-type inequality on (0, 10]^2
    validity = {}
    for p in (3.5, 4.0, 6.0, 10.0):
        d = 3
        v = rng.uniform(0.0, 10.0, n_pairs)
        w = rng.uniform(0.0, 10.0, n_pairs)
        v[v == 0] = 1e-12
        w[w == 0] = 1e-12
        A = constants.constant_A(d, p)
        alpha, beta = 2.0 * p / (p - d), 2.0 * p / (p + d)
        with np.errstate(over="ignore"):
            log_rhs = np.logaddexp(math.log(A) + alpha * np.log(v), math.log(0.5) + beta * np.log(w))
        ratio = np.exp(np.log(v) + np.log(w) - log_rhs)
        violations = int(np.sum(ratio > 1.0))
        validity[f"{p:g}"] = {"violations": violations, "max_ratio": float(ratio.max())}
        margins.append({"check": "young-type", "p": p, "ratio": float(ratio.max()), "violations": violations})
        ok &= violations == 0
    diag["young_validity"] = validity

    if run is None:
        run = solver.run(small_data_config(T=1.0, sample_every=1, p_grid=[2.0, 3.0, 4.0, 5.0, 6.0]))
    s = run.series
    d = run.config.d
    diag["trajectory"] = _base_diagnostics(run)
    if run.failed:
        return VerificationReport("inequalities", NUMERICAL, asdict(tol), margins, diag, run.config.model_dump(mode="json"))
    for p in [float(p) for p in s.p_grid if p > d]:
        j = s.column(p)
        lp = s.lp_values[:, j]
        wrel = s.W_rel_values[:, j]
        if np.any(lp <= 0):
            continue
        logu = np.log(lp)
        # trajectory form of the Young-type inequality
        logW = np.log(np.maximum(wrel, 1e-300)) + p * logu
        lhs = (1.0 + (p - d) / 2.0) * logu + ((p + d) / (2.0 * p)) * logW
        rhs = np.logaddexp(math.log(constants.constant_A(d, p)) + (p * (p - d + 2.0) / (p - d)) * logu,
                           math.log(0.5) + logW)
        r210 = float(np.exp(lhs - rhs).max())
        margins.append({"check": "trajectory young-type", "p": p, "ratio": r210})
        ok &= r210 <= 1.0

        # (1/p) d/dt ||u||_p^p + W/2 <= C77 ||u||_p^(p(p-d+2)/(p-d)), divided by ||u||_p^p
        dt = np.diff(s.times)
        dlog = np.diff(logu) / dt
        w_mid = 0.5 * (wrel[1:] + wrel[:-1])
        lhs_n = dlog + 0.5 * w_mid
        log_mid = 0.5 * (logu[1:] + logu[:-1])
        rhs_n = np.exp(constants.log_constant_C77(d, p) + (2.0 * p / (p - d)) * log_mid)
        excess = float(np.max((lhs_n - rhs_n) / np.maximum(w_mid, 1e-300)))
        margins.append({"check": "energy differential inequality", "p": p, "violation": max(excess, 0.0),
                        "max_lhs_over_W": float(np.max(lhs_n / np.maximum(w_mid, 1e-300)))})
        ok &= excess <= tol.upper
    return VerificationReport("inequalities", PASS if ok else FAIL, asdict(tol), margins, diag,
                              run.config.model_dump(mode="json"))


THEOREMS = {
    "thm31": check_thm31,
    "thm41": check_thm41,
    "thm51": check_thm51,
    "thm61": check_thm61,
}
