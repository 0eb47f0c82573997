"""``nsgls`` command line: constants, psi, norms, simulate, verify, sweep.

Exit codes: 0 success or pass, 1 check failed, 2 hypothesis not met,
3 numerical failure, 4 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from pydantic import ValidationError

from . import __version__, constants, solver, verify
from . import field as fld
from . import psi as psimod

EXIT_OK, EXIT_FAIL, EXIT_NOT_MET, EXIT_NUMERICAL, EXIT_BAD_INPUT = 0, 1, 2, 3, 4
STATUS_EXIT = {
    verify.PASS: EXIT_OK,
    verify.FAIL: EXIT_FAIL,
    verify.NOT_MET: EXIT_NOT_MET,
    verify.NUMERICAL: EXIT_NUMERICAL,
}
DEFAULT_SEED = 0


class BadInput(Exception):
    pass


# -- argument helpers --------------------------------------------------------


def parse_p_list(text):
    """``4,6,10``, ``a:b:count`` (log-spaced, inclusive) or ``inf``."""
    text = text.strip()
    try:
        if ":" in text:
            a, b, count = text.split(":")
            return [float(x) for x in np.geomspace(float(a), float(b), int(count))]
        return [math.inf if t.strip() in ("inf", "infinity") else float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise BadInput(f"cannot parse p list {text!r}: {exc}") from None


def _load_json_arg(text):
    """JSON from a file path or inline text."""
    if text is None:
        return None
    try:
        if os.path.exists(text):
            with open(text) as fh:
                return json.load(fh)
        return json.loads(text)
    except (OSError, json.JSONDecodeError) as exc:
        raise BadInput(f"cannot read JSON {text!r}: {exc}") from None


def _load_config(path, seed):
    try:
        raw = _load_json_arg(path)
        if seed is not None:
            raw = dict(raw, seed=seed)
        return solver.load_config(raw)
    except ValidationError as exc:
        raise BadInput("invalid config:\n  " + "\n  ".join(solver.config_errors(exc))) from None


def _write_manifest(outdir, command, config_path, seed, started):
    manifest = {
        "command": command,
        "config": config_path,
        "outdir": os.path.abspath(outdir),
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.time() - started, 3),
    }
    with open(os.path.join(outdir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _prepare_outdir(path):
    os.makedirs(path, exist_ok=True)
    return path


def _write_text(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _fmt(x):
    if x is None:
        return "n/a"
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


# -- subcommands ---------------------------------------------------------------


def cmd_constants(args):
    if args.d < 3:
        raise BadInput(f"constants need d >= 3, got d = {args.d}")
    ps = parse_p_list(args.p)
    rows = [constants.constants_record(args.d, p, riesz=args.riesz) for p in ps]
    # KS_2d3 depends on d alone, so it does not make a row valid
    if not any(set(r.valid_cells()) - {"KS_2d3"} for r in rows):
        reasons = sorted({v for r in rows for v in r.reasons.values()})
        raise BadInput("no valid constants for these (d, p): " + "; ".join(reasons))
    if args.format == "json":
        out = [{k: (v if not isinstance(v, float) or math.isfinite(v) else repr(v)) for k, v in r.as_row().items()}
               for r in rows]
        sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(constants.ConstantsRecord.CSV_COLUMNS)
        for r in rows:
            row = r.as_row()
            w.writerow([_fmt(row[c]) for c in constants.ConstantsRecord.CSV_COLUMNS])
    return EXIT_OK


def _psi_from_args(spec, p_grid, snapshot):
    spec = dict(spec)
    u0 = None
    if spec.get("kind") == "natural" and not spec.get("fields"):
        if snapshot is None:
            raise BadInput("natural psi needs --snapshot or a 'fields' list")
        u0 = fld.read_snapshot(snapshot)
    try:
        return verify.build_psi(spec, u0, p_grid)
    except (ValueError, KeyError, TypeError) as exc:
        raise BadInput(f"psi spec: {exc}") from None


def cmd_psi(args):
    spec = _load_json_arg(args.psi_spec)
    p_grid = parse_p_list(args.p_grid)
    psi = _psi_from_args(spec, p_grid, args.snapshot)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["p", "psi"])
    for p in p_grid:
        v = psi(p)
        w.writerow([_fmt(p), "excluded" if v is psimod.EXCLUDED else _fmt(v)])
    for msg in psi.warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return EXIT_OK


def norms_report(u, p_grid, psi=None):
    """Dict with lp, l2, kappa (p > 2 only) and the optional GLS norm."""
    lp = fld.lp_norms(u, p_grid)
    l2 = fld.lp_norm(u, 2.0)
    kap = []
    for p, v in zip(p_grid, lp):
        if not (p > 2 and math.isfinite(p)):
            kap.append(None)
        elif l2 == 0.0:
            kap.append(0.0)
        else:
            kap.append(psimod.kappa(float(v), l2, u.d, p))
    out = {"d": u.d, "n": u.grid.n, "L": u.grid.L, "time": u.time_tag, "p": list(p_grid),
           "lp": [float(x) for x in lp], "l2": l2, "kappa": kap}
    if psi is not None:
        pts = [p for p in psi.support_grid]
        prof = psimod.NormProfile(np.array(pts), fld.lp_norms(u, pts), source="snapshot")
        out["gls"] = psimod.gls_norm(prof, psi)
    return out


def cmd_norms(args):
    try:
        u = fld.read_snapshot(args.snapshot)
    except fld.SnapshotError as exc:
        raise BadInput(f"{args.snapshot}: {exc}") from None
    except OSError as exc:
        raise BadInput(str(exc)) from None
    p_grid = parse_p_list(args.p_grid)
    if any(not p >= 1 for p in p_grid):
        raise BadInput("every p must be >= 1")
    psi = None
    if args.psi_spec:
        psi = _psi_from_args(_load_json_arg(args.psi_spec), [p for p in p_grid if math.isfinite(p)], args.snapshot)
    report = verify._jsonable(norms_report(u, p_grid, psi))
    sys.stdout.write(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_simulate(args):
    started = time.time()
    config = _load_config(args.config, args.seed)
    outdir = _prepare_outdir(args.out_dir)
    res = solver.run(config, outdir=outdir)
    _write_text(os.path.join(outdir, "norms.csv"), res.series.to_csv())
    summary = {
        "failed": res.failed,
        "message": res.message,
        "snapshots": [os.path.basename(p) for p in res.snapshots],
        "diagnostics": {k: v for k, v in res.series.diagnostics.items() if k != "cfl_history"},
        "cfl_max": max(res.series.diagnostics["cfl_history"], default=0.0),
        "config": config.model_dump(mode="json"),
    }
    _write_text(os.path.join(outdir, "run.json"), json.dumps(verify._jsonable(summary), indent=2, sort_keys=True) + "\n")
    _write_manifest(outdir, "simulate", args.config, config.seed, started)
    if res.failed:
        print(f"numerical failure: {res.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def _verify_config(args):
    if args.config is None:
        return verify.small_data_config(seed=DEFAULT_SEED if args.seed is None else args.seed)
    return _load_config(args.config, args.seed)


def run_check(theorem, config, psi_spec=None, run=None):
    if theorem == "inequalities":
        return verify.check_inequalities(run=run, seed=config.seed)
    try:
        fn = verify.THEOREMS[theorem]
    except KeyError:
        raise BadInput(f"unknown theorem {theorem!r}") from None
    try:
        return fn(config, psi_spec=psi_spec, run=run)
    except (ValueError, KeyError) as exc:
        raise BadInput(str(exc)) from None


def cmd_verify(args):
    started = time.time()
    config = _verify_config(args)
    psi_spec = _load_json_arg(args.psi_spec)
    outdir = _prepare_outdir(args.out_dir)
    res = solver.run(config)
    report = run_check(args.theorem, config, psi_spec, res)
    _write_text(os.path.join(outdir, "norms.csv"), res.series.to_csv())
    _write_text(os.path.join(outdir, "report.json"), report.to_json() + "\n")
    _write_manifest(outdir, f"verify {args.theorem}", args.config or "preset:small-data", config.seed, started)
    print(f"{args.theorem}: {report.status}")
    return STATUS_EXIT[report.status]


SWEEP_COLUMNS = ("param", "value", "status", "norm_d", "threshold_min", "threshold_margin", "margin_sign",
                 "worst_ratio", "worst_violation")


def _sweep_one(job):
    theorem, raw, psi_spec, param, value = job
    config = solver.load_config(raw)
    d = config.d
    u0 = solver.initial_field(config)
    norm_d = fld.lp_norm(u0, d)
    above = [p for p in config.p_grid if p > d]
    th = min(constants.threshold(d, p) for p in above) if above and d >= 3 else float("nan")
    report = run_check(theorem, config, psi_spec)
    ratios = [m["ratio"] for m in report.margins if isinstance(m.get("ratio"), (int, float))]
    viols = [m["violation"] for m in report.margins if isinstance(m.get("violation"), (int, float))]
    margin = th - norm_d
    return {
        "param": param,
        "value": value,
        "status": report.status,
        "norm_d": norm_d,
        "threshold_min": th,
        "threshold_margin": margin,
        "margin_sign": "" if math.isnan(margin) else ("+" if margin > 0 else "-"),
        "worst_ratio": max(ratios) if ratios else None,
        "worst_violation": max(viols) if viols else None,
    }


def _with_param(raw, param, value):
    raw = json.loads(json.dumps(raw))
    if param == "amplitude":
        raw["initial"]["amplitude"] = value
        raw["initial"]["target_norm"] = None
    elif param == "n":
        raw["n"] = int(value)
    elif param == "dt":
        raw["dt"] = value
    else:
        raise BadInput(f"sweep parameter must be amplitude, n or dt; got {param!r}")
    return raw


def _max_workers(requested):
    cap = os.environ.get("NSGLS_THREADS")
    cap = max(1, int(cap)) if cap else (os.cpu_count() or 1)
    return max(1, min(requested or cap, cap))


def cmd_sweep(args):
    started = time.time()
    base = _load_config(args.config, args.seed).model_dump(mode="json")
    values = parse_p_list(args.values)
    psi_spec = _load_json_arg(args.psi_spec)
    jobs = []
    for v in values:
        raw = _with_param(base, args.param, v)
        try:
            solver.load_config(raw)
        except ValidationError as exc:
            raise BadInput(f"{args.param}={v}: " + "; ".join(solver.config_errors(exc))) from None
        jobs.append((args.theorem, raw, psi_spec, args.param, v))
    workers = _max_workers(args.jobs)
    if workers == 1 or len(jobs) == 1:
        rows = [_sweep_one(j) for j in jobs]
    else:
        # children run single-threaded transforms so the total stays under the cap
        env_before = os.environ.get("NSGLS_THREADS")
        os.environ["NSGLS_THREADS"] = "1"
        try:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_sweep_one, jobs))
        finally:
            if env_before is None:
                os.environ.pop("NSGLS_THREADS", None)
            else:
                os.environ["NSGLS_THREADS"] = env_before
    outdir = _prepare_outdir(args.out_dir)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in SWEEP_COLUMNS])
    _write_text(os.path.join(outdir, "sweep.csv"), buf.getvalue())
    _write_manifest(outdir, f"sweep {args.param}", args.config, base["seed"], started)
    sys.stdout.write(buf.getvalue())
    return EXIT_OK


# -- parser ----------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="nsgls", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"nsgls {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=None,
                       help=f"random seed; overrides the config seed (default {DEFAULT_SEED})")
        return p

    p = add("constants", "table of the sharp constants for one dimension")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--p", required=True, help="comma list (4,6,10) or a:b:count log range")
    p.add_argument("--riesz", choices=sorted(constants.RIESZ_BOUNDS), default="kr")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_constants)

    p = add("psi", "evaluate a psi-function on a p-grid")
    p.add_argument("--psi-spec", required=True, help="JSON text or path")
    p.add_argument("--p-grid", required=True)
    p.add_argument("--snapshot", help="field for a natural psi")
    p.set_defaults(func=cmd_psi)

    p = add("norms", "L_p, kappa and GLS norms of a snapshot")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--p-grid", default="2,3,4,5,6")
    p.add_argument("--psi-spec", help="JSON text or path")
    p.set_defaults(func=cmd_norms)

    p = add("simulate", "run a configuration and write norms.csv")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = add("verify", "run a configuration and check one theorem")
    p.add_argument("--theorem", required=True, choices=sorted(verify.THEOREMS) + ["inequalities"])
    p.add_argument("--config", help="config JSON; default is the small-data preset")
    p.add_argument("--psi-spec", help="JSON text or path")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_verify)

    p = add("sweep", "vary one scalar and aggregate check margins")
    p.add_argument("--config", required=True)
    p.add_argument("--param", required=True, choices=("amplitude", "n", "dt"))
    p.add_argument("--values", required=True, help="comma list or a:b:count log range")
    p.add_argument("--theorem", default="thm31", choices=sorted(verify.THEOREMS))
    p.add_argument("--psi-spec", help="JSON text or path")
    p.add_argument("--jobs", type=int, default=None, help="worker processes (capped by NSGLS_THREADS)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_BAD_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args)
    except BadInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
