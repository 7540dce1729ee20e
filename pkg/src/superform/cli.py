"""Command-line entry point.

Every subcommand prints a one-line summary, optionally writes a JSON report
(and CSV tables) to ``--out``, and embeds a :class:`RunManifest` in the
report.  Exit codes: 0 pass, 1 fail, 2 usage or input error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import CapabilityError, DomainError, ParseError, SuperformError

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

TOLERANCE_DEFAULTS = {
    "ded": 1e-6,
    "quad": None,  # tol-ded / 10
    "mc": 1e-10,
    "ode": None,  # fixed step
    "lab": None,  # per config, 1e-9
    "margin": 0.2,
}


class UsageError(SuperformError):
    """Bad command-line input that argparse cannot catch."""


@dataclass
class RunManifest:
    command: list
    config: dict
    seed: int
    version: str
    started: str
    wall_clock: float = 0.0
    tolerances: dict = field(default_factory=dict)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    return obj


# ---------------------------------------------------------------------------
# input parsing


def _parse_box(text):
    try:
        box = [[float(v) for v in part.split(",")] for part in text.split(";")]
    except ValueError:
        raise UsageError(f"bad --box {text!r}; expected 'lo,hi;lo,hi;...'") from None
    if any(len(b) != 2 for b in box):
        raise UsageError(f"bad --box {text!r}; every axis needs lo,hi")
    return box


def _default_box(args):
    if args.box:
        return _parse_box(args.box)
    dim = args.dim or 2
    return [[-1.0, 1.0]] * dim


def load_form(ref, args, degree=None):
    """A form from a JSON file, a file holding a literal, or an inline literal."""
    from .literals import domain_from_json, form_from_json, parse_form

    path = Path(ref)
    text = path.read_text() if path.is_file() else ref
    stripped = text.strip()
    if stripped.startswith("{"):
        doc = json.loads(stripped)
        if degree is not None and "degree" not in doc:
            doc["degree"] = degree
        return form_from_json(doc)
    return parse_form(stripped, domain_from_json(_default_box(args)), degree)


def _parse_point(text, dim=None):
    try:
        P = [float(v) for v in text.split(",")]
    except ValueError:
        raise UsageError(f"bad point {text!r}; expected comma-separated numbers") from None
    if dim is not None and len(P) != dim:
        raise UsageError(f"point {text!r} has {len(P)} coordinates, expected {dim}")
    return P


def _parse_path(text, dim):
    return [_parse_point(p, dim) for p in text.split(";")]


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _parse_params(items):
    params = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"bad --param {item!r}; expected key=value")
        params[key.strip()] = _parse_value(value.strip())
    return params


def _parse_battery(text):
    from .integrate import BatterySpec

    if not text:
        return BatterySpec()
    path = Path(text)
    if path.is_file():
        spec = json.loads(path.read_text())
    else:
        spec = {}
        for item in text.split(","):
            key, sep, value = item.partition("=")
            if not sep:
                raise UsageError(f"bad --battery item {item!r}; expected key=value")
            spec[key.strip()] = value.strip()
    try:
        grid = int(spec.get("grid", 2))
        fracs = spec.get("radii", spec.get("radius_fractions", (0.1, 0.2)))
        if isinstance(fracs, str):
            fracs = [float(v) for v in fracs.split(":")]
        rho = float(spec.get("rho", 0.5))
    except (TypeError, ValueError):
        raise UsageError(f"bad --battery {text!r}") from None
    return BatterySpec(grid=grid, radius_fractions=tuple(float(f) for f in fracs), rho=rho)


def _parse_radii(text):
    r0, sep, k = text.partition(",")
    try:
        return float(r0), int(k) if sep else 8
    except ValueError:
        raise UsageError(f"bad --radii {text!r}; expected r0,count") from None


# ---------------------------------------------------------------------------
# output


def _write_csv(path, rows):
    with open(path, "w", newline="") as fh:
        csv.writer(fh).writerows(rows)


def _emit(args, stem, report, summary, passed, tables=None, label=None):
    report = _jsonable(report)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"{stem}.json").write_text(json.dumps(report, indent=2) + "\n")
        for name, rows in (tables or {}).items():
            _write_csv(out / f"{stem}{name}.csv", rows)
    if args.json:
        print(json.dumps(report, indent=2))
    print(f"{label or ('PASS' if passed else 'FAIL')}: {summary}")
    return EXIT_PASS if passed else EXIT_FAIL


def _tolerances(args):
    tols = dict(TOLERANCE_DEFAULTS)
    for key in tols:
        value = getattr(args, f"tol_{key}", None)
        if value is not None:
            tols[key] = value
    return tols


# ---------------------------------------------------------------------------
# commands


def cmd_forms_check(args, manifest):
    from .acceptance import identity_suite
    from .forms import exterior_derivative, wedge
    from .literals import format_form

    if not args.form:
        checks, failures = identity_suite(args.count, args.seed)
        report = {"mode": "random", "forms": args.count, "identities_checked": checks,
                  "failures": [list(f) for f in failures]}
        summary = f"{checks} exact identities on {args.count} random forms, {len(failures)} failures"
        return report, summary, not failures, {}
    forms = [load_form(ref, args) for ref in args.form]
    rows = []
    ok = True
    for lam in forms:
        dlam = exterior_derivative(lam)
        row = {"form": format_form(lam), "degree": lam.degree, "d": format_form(dlam)}
        if lam.degree + 2 <= lam.dim:
            row["dd_zero"] = exterior_derivative(dlam).is_zero()
            ok &= row["dd_zero"]
        rows.append(row)
    if len(forms) == 2:
        lam, mu = forms
        if lam.degree + mu.degree + 1 <= lam.dim:
            sign = -1 if lam.degree % 2 else 1
            lhs = exterior_derivative(wedge(lam, mu))
            rhs = wedge(exterior_derivative(lam), mu) + wedge(lam, exterior_derivative(mu)).scale(sign)
            leibniz = lhs == rhs
            rows.append({"leibniz": leibniz, "d_wedge": format_form(lhs)})
            ok &= leibniz
    return {"mode": "given", "forms": rows}, f"checked {len(forms)} form(s)", ok, {}


def cmd_ded_verify(args, manifest):
    from .integrate import verify_ded

    lam = load_form(args.lam, args)
    cand = load_form(args.candidate, args, lam.degree + 1)
    battery = _parse_battery(args.battery)
    tols = manifest.tolerances
    w = verify_ded(lam, cand, battery, tols["ded"], tols["quad"])
    manifest.config["battery"] = asdict(battery)
    report = w.to_json()
    summary = f"{w.verdict}, max residual {w.max_residual:.3e} over {len(w.tests)} tests"
    rows = [("center", "radius", "beta", "entry", "lhs", "rhs", "residual", "quad_error")]
    for t in w.tests:
        rows.append((" ".join(f"{c:.6g}" for c in t.center), t.radius, " ".join(map(str, t.beta)),
                     f"{t.entry[0]},{t.entry[1]}", t.lhs, t.rhs, t.residual, t.quad_error))
    return report, summary, w.passed, {"_tests": rows}


def cmd_density(args, manifest):
    from .density import canonical_set, density_degree, dyadic_schedule, zero_set

    if (args.set is None) == (args.form is None):
        raise UsageError("density needs exactly one of --set or --form")
    if args.set is not None:
        E = canonical_set(args.set, args.dim or 2, **_parse_params(args.param))
    else:
        E = zero_set(load_form(args.form, args), args.eps)
    P = _parse_point(args.point, E.dim) if args.point else [0.0] * E.dim
    r0, count = _parse_radii(args.radii)
    report = density_degree(E, P, dyadic_schedule(r0, count), args.samples, args.seed,
                            use_exact=not args.sample_only)
    margin = manifest.tolerances["margin"]
    doc = report.to_json(margin)
    doc["set"] = E.name
    slope = doc["slope"]
    slope_text = f"{slope:.4f}" if isinstance(slope, float) else slope
    summary = (f"{E.name} at {tuple(P)}: slope {slope_text}"
               + (" (exact zero)" if report.exact_zero else "")
               + f", superdense at m={E.dim + 1}: {doc['verdicts'][str(E.dim + 1)]}")
    return doc, summary, True, {"": list(report.csv_rows())}


def cmd_mc_check(args, manifest):
    from .cartan import CATALOG, chart, maurer_cartan, mc_residual, mc_residual_numeric

    names = sorted(CATALOG) if args.chart == "all" else [args.chart]
    rng = np.random.default_rng(args.seed)
    tol = manifest.tolerances["mc"]
    rows = []
    ok = True
    for name in names:
        G = chart(name)
        symbolic = mc_residual(maurer_cartan(G)).is_zero()
        lo, hi = G.domain.lo, G.domain.hi
        U = lo[:, None] + (hi - lo)[:, None] * rng.random((G.dim, args.points))
        numeric = mc_residual_numeric(G, U)
        rows.append({"chart": name, "dim": G.dim, "L": G.L, "symbolic_zero": symbolic,
                     "numeric_max_residual": numeric})
        ok &= numeric < tol
    worst = max(r["numeric_max_residual"] for r in rows)
    summary = f"{len(rows)} chart(s), max numeric residual {worst:.3e} (tol {tol:g})"
    return {"charts": rows, "points": args.points}, summary, ok, {}


def cmd_cartan_integrate(args, manifest):
    from .cartan import cartan_integrate

    phi = load_form(args.phi, args, 1)
    path = _parse_path(args.path, phi.dim)
    start = np.array(json.loads(args.start), dtype=float) if args.start else None
    f, traj = cartan_integrate(phi, path, args.step, start=start, tol=manifest.tolerances["ode"], trajectory=True)
    det = float(np.linalg.det(f))
    report = {"final": f, "det": det, "steps": len(traj), "path": path}
    rows = [("step",) + tuple(f"f{i + 1}{j + 1}" for i in range(phi.L) for j in range(phi.L))]
    rows += [(k + 1,) + tuple(g.ravel()) for k, g in enumerate(traj)]
    summary = f"developed over {len(traj)} steps, det {det:.6g}"
    return report, summary, bool(np.isfinite(f).all()), {"_trajectory": rows}


def cmd_lab(args, manifest):
    from .lab import load_config, run_experiment

    config = load_config(args.config, args.harness)
    if config.get("harness", args.harness) != args.harness:
        raise UsageError(f"config is for harness {config.get('harness')!r}, not {args.harness!r}")
    config["harness"] = args.harness
    if args.seed_given:
        config["seed"] = args.seed
    if manifest.tolerances["lab"] is not None:
        config["tolerance"] = manifest.tolerances["lab"]
    density = config.setdefault("density", {})
    if args.tol_margin is not None:
        density["margin"] = args.tol_margin
    if args.samples is not None:
        density["samples"] = args.samples
    manifest.config["experiment"] = config
    manifest.seed = int(config.get("seed", 0))
    rep = run_experiment(config)
    s = rep.summary
    summary = f"{args.harness}, {s.get('probes', len(rep.probes))} probes, {s.get('violations', 0)} violations"
    args.label = rep.verdict
    return rep.to_json(), summary, rep.passed, {"_probes": list(rep.csv_rows())}


def cmd_selftest(args, manifest):
    from .acceptance import run_all

    numbers = [int(n) for n in args.criteria.split(",")] if args.criteria else None
    results = run_all(numbers, echo=print)
    report = {"criteria": [asdict(r) for r in results]}
    passed = sum(r.passed for r in results)
    return report, f"{passed}/{len(results)} acceptance criteria", passed == len(results), {}


# ---------------------------------------------------------------------------
# parser


def _common(p):
    p.add_argument("--out", help="directory for the JSON report and CSV tables")
    p.add_argument("--json", action="store_true", help="also print the full JSON report")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--box", help="chart box 'lo,hi;lo,hi' for literal forms (default [-1,1]^dim)")
    p.add_argument("--dim", type=int, default=None)
    for key in TOLERANCE_DEFAULTS:
        p.add_argument(f"--tol-{key}", type=float, default=None)


def build_parser():
    ap = argparse.ArgumentParser(prog="superform", description="Matrix-valued forms, weak derivatives, "
                                 "density estimates and Maurer-Cartan experiments.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="group", required=True)

    forms = sub.add_parser("forms").add_subparsers(dest="action", required=True)
    p = forms.add_parser("check", help="exact identities on given or random forms")
    _common(p)
    p.add_argument("--form", action="append", help="form file or literal (repeatable; two forms check Leibniz)")
    p.add_argument("--count", type=int, default=200)
    p.set_defaults(func=cmd_forms_check)

    ded = sub.add_parser("ded").add_subparsers(dest="action", required=True)
    p = ded.add_parser("verify", help="test a candidate weak derivative against bump forms")
    _common(p)
    p.add_argument("--lambda", dest="lam", required=True)
    p.add_argument("--candidate", required=True)
    p.add_argument("--battery", help="'grid=2,radii=0.1:0.2,rho=0.5' or a JSON file")
    p.set_defaults(func=cmd_ded_verify)

    p = sub.add_parser("density", help="density degree of a set at a point")
    _common(p)
    p.add_argument("--set", help="named set (full, empty, half-space, hyperplane, ball, cusp, ...)")
    p.add_argument("--param", action="append", help="set parameter key=value (value may be JSON)")
    p.add_argument("--form", help="form file or literal whose zero set is probed")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--point", help="probe point 'x,y,...' (default origin)")
    p.add_argument("--radii", default="0.4,8", help="r0,count for radii r0 * 2^-k")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--sample-only", action="store_true", help="ignore closed-form deficits")
    p.set_defaults(func=cmd_density)

    cartan = sub.add_parser("cartan").add_subparsers(dest="action", required=True)
    p = cartan.add_parser("mc-check", help="Maurer-Cartan residual of catalog charts")
    _common(p)
    p.add_argument("--chart", default="all")
    p.add_argument("--points", type=int, default=100)
    p.set_defaults(func=cmd_mc_check)
    p = cartan.add_parser("integrate", help="develop a 1-form along a polyline")
    _common(p)
    p.add_argument("--phi", required=True)
    p.add_argument("--path", required=True, help="polyline 'x,y;x,y;...'")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--start", help="initial matrix as JSON (default identity)")
    p.set_defaults(func=cmd_cartan_integrate)

    lab = sub.add_parser("lab").add_subparsers(dest="action", required=True)
    for harness in ("thm31", "tangency", "cor52"):
        p = lab.add_parser(harness, help=f"run the {harness} harness")
        _common(p)
        p.add_argument("--config", default="canonical", help="config file or builtin name")
        p.add_argument("--samples", type=int, default=None)
        p.set_defaults(func=cmd_lab, harness=harness)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    _common(p)
    p.add_argument("--criteria", help="comma-separated subset, e.g. 1,3,8")
    p.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = 0
    config = {k: v for k, v in vars(args).items() if k not in ("func", "seed_given") and not k.startswith("tol_")}
    manifest = RunManifest(
        command=["superform"] + argv,
        config=config,
        seed=args.seed,
        version=__version__,
        started=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        tolerances=_tolerances(args),
    )
    start = time.perf_counter()
    try:
        report, summary, passed, tables = args.func(args, manifest)
    except (ParseError, DomainError, CapabilityError, UsageError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SuperformError as exc:
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    manifest.wall_clock = time.perf_counter() - start
    report = dict(report)
    report["manifest"] = asdict(manifest)
    stem = "_".join(p for p in (args.group, getattr(args, "action", None)) if p).replace("-", "_")
    return _emit(args, stem, report, summary, passed, tables, getattr(args, "label", None))
