"""Experiment harnesses pairing zero-set densities with differential residuals.

Each harness takes a JSON-style config, scans probes, estimates the density
degree of a set at each probe, classifies it at ``m = M + 1`` and checks
the implication the experiment is about:

``thm31``
    probes of the zero set of a C^1 form ``gamma``; a superdense probe must
    have ``d gamma = 0`` there.
``tangency``
    probes of the zero set of ``f^* omega``; a superdense probe must have
    ``f^* d omega = 0`` there.
``cor52``
    probes of the agreement set ``{f^* Gamma = phi}``; a superdense probe
    must satisfy the Maurer-Cartan equation for ``phi`` there.

A violated implication gives ``FAIL``.  When the premise that makes the
experiment informative is absent (``gamma`` not C^1, or ``phi`` satisfying
the Maurer-Cartan equation on the whole grid) the verdict is
``HYPOTHESIS_NOT_MET``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import List, Optional

import numpy as np

from .cartan import chart, grid_points, maurer_cartan, mc_residual
from .density import SUPERDENSE, PointSet, classify, density_degree, dyadic_schedule, zero_set
from .errors import DomainError
from .fields import Smoothness
from .forms import entry_max_norm, exterior_derivative, pullback
from .literals import domain_from_json, parse_form, parse_map

__all__ = [
    "PASS",
    "FAIL",
    "HYPOTHESIS_NOT_MET",
    "ExperimentReport",
    "run_thm31",
    "run_tangency",
    "run_cor52",
    "run_experiment",
    "load_config",
    "builtin_configs",
]

PASS = "PASS"
FAIL = "FAIL"
HYPOTHESIS_NOT_MET = "HYPOTHESIS_NOT_MET"

DENSITY_DEFAULTS = {"r0": 0.4, "radii": 8, "samples": 100_000, "margin": 0.2}


@dataclass
class ExperimentReport:
    harness: str
    verdict: str
    config: dict
    probes: List[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)

    @property
    def passed(self):
        return self.verdict in (PASS, HYPOTHESIS_NOT_MET)

    def to_json(self):
        return {
            "harness": self.harness,
            "verdict": self.verdict,
            "config": self.config,
            "summary": self.summary,
            "notes": self.notes,
            "probes": self.probes,
        }

    def csv_rows(self):
        cols = ["point", "in_set", "slope", "stderr", "exact_zero", "verdict", "residual", "violation"]
        yield tuple(cols)
        for p in self.probes:
            yield tuple(" ".join(f"{v:.12g}" for v in p["point"]) if c == "point" else p.get(c) for c in cols)


# ---------------------------------------------------------------------------
# config helpers


def builtin_configs():
    """Names of the configs shipped with the package."""
    root = resources.files("superform") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_config(ref: str, harness: Optional[str] = None) -> dict:
    """Load a config from a path, a builtin name, or ``canonical`` for the harness default."""
    path = Path(ref)
    if path.is_file():
        return json.loads(path.read_text())
    name = path.name[:-5] if path.name.endswith(".json") else path.name
    candidates = [name] if harness is None else [f"{harness}_{name}", name]
    root = resources.files("superform") / "configs"
    for cand in candidates:
        res = root / f"{cand}.json"
        if res.is_file():
            return json.loads(res.read_text())
    raise DomainError(f"no config file or builtin named {ref!r}; builtins: {builtin_configs()}")


def _density_params(config):
    params = dict(DENSITY_DEFAULTS)
    params.update(config.get("density", {}))
    return params


def _fits(point, r, box):
    return all(lo <= x - r and x + r <= hi for x, (lo, hi) in zip(point, box))


def _spread(points, count):
    """``count`` points picked at evenly spaced positions of the list."""
    if points.shape[1] <= count:
        return points
    idx = np.unique(np.linspace(0, points.shape[1] - 1, count).round().astype(int))
    return points[:, idx]


def _probes(spec, box, r0, seed, member=None):
    """Probe points ``(M, K)`` from a spec dict.

    ``ball``: uniform in a ball (seeded).  ``list``: explicit points.
    ``scan``: grid points of the set, limited to balls that fit in the box.
    """
    kind = spec.get("kind", "scan")
    dim = len(box)
    if kind == "list":
        pts = np.asarray(spec["points"], dtype=float).reshape(-1, dim).T
    elif kind == "ball":
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 7]))
        count = int(spec.get("count", 50))
        c = np.asarray(spec.get("center", [0.0] * dim), dtype=float)
        R = float(spec.get("radius", 0.5))
        U = rng.normal(size=(dim, count))
        U /= np.linalg.norm(U, axis=0)
        rad = R * rng.random(count) ** (1.0 / dim)
        pts = c[:, None] + U * rad
    elif kind == "scan":
        if member is None:
            raise DomainError("scan probes need a set to scan")
        grid = grid_points(domain_from_json(box), int(spec.get("grid", 41)))
        fit = np.array([_fits(p, r0, box) for p in grid.T])
        grid = grid[:, fit]
        pts = _spread(grid[:, member(grid)], int(spec.get("count", 20)))
    else:
        raise DomainError(f"unknown probe kind {kind!r}")
    for p in pts.T:
        if not _fits(p, r0, box):
            raise DomainError(f"probe {p.tolist()} too close to the box edge for r0 = {r0}")
    return pts


def _probe_density(E: PointSet, P, params, seed, index):
    schedule = dyadic_schedule(float(params["r0"]), int(params["radii"]))
    report = density_degree(E, P, schedule, int(params["samples"]), seed=seed * 100003 + index)
    m = E.dim + 1
    return report, classify(report, m, float(params["margin"]))


def _finite(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _probe_row(P, in_set, report, verdict, residual, tol):
    violation = verdict == SUPERDENSE and residual > tol
    return {
        "point": [float(v) for v in P],
        "in_set": bool(in_set),
        "slope": _finite(report.slope),
        "stderr": _finite(report.stderr),
        "exact_zero": report.exact_zero,
        "verdict": verdict,
        "residual": float(residual),
        "violation": bool(violation),
    }


def _verdict(rows):
    return FAIL if any(r["violation"] for r in rows) else PASS


def _slope_summary(rows):
    slopes = [r["slope"] for r in rows if not r["exact_zero"] and r["slope"] is not None]
    return {
        "probes": len(rows),
        "superdense": sum(r["verdict"] == SUPERDENSE for r in rows),
        "violations": sum(r["violation"] for r in rows),
        "max_residual": max((r["residual"] for r in rows), default=0.0),
        "slope_min": min(slopes) if slopes else None,
        "slope_max": max(slopes) if slopes else None,
    }


# ---------------------------------------------------------------------------
# harnesses


def run_thm31(config: dict) -> ExperimentReport:
    """Zero set of ``gamma`` versus ``d gamma`` at superdense probes."""
    box = [list(map(float, b)) for b in config["box"]]
    dom = domain_from_json(box)
    gamma = parse_form(config["gamma"], dom, config.get("degree"))
    tol = float(config.get("tolerance", 1e-9))
    eps = float(config.get("zero_eps", 0.0))
    seed = int(config.get("seed", 0))
    params = _density_params(config)
    notes = []
    if not all(f.smoothness >= Smoothness.C1 for f in gamma.fields()):
        notes.append("gamma is not C^1; d gamma is not known to be its distributional derivative")
        return ExperimentReport("thm31", HYPOTHESIS_NOT_MET, config, notes=notes)
    dgamma = exterior_derivative(gamma)
    Z = zero_set(gamma, eps)
    pts = _probes(config.get("probes", {}), box, float(params["r0"]), seed, Z.contains)
    rows = []
    for k, P in enumerate(pts.T):
        report, verdict = _probe_density(Z, P, params, seed, k)
        res = float(entry_max_norm(dgamma, P))
        rows.append(_probe_row(P, Z(P), report, verdict, res, tol))
    summary = _slope_summary(rows)
    if not rows:
        notes.append("no probes: vacuous pass")
    return ExperimentReport("thm31", _verdict(rows), config, rows, summary, notes)


def run_tangency(config: dict) -> ExperimentReport:
    """Tangency set ``{f^* omega = 0}`` versus ``f^* d omega``."""
    box = [list(map(float, b)) for b in config["box"]]
    dom = domain_from_json(box)
    target = domain_from_json(config["target_box"])
    omega = parse_form(config["omega"], target, config.get("degree"))
    fmap = parse_map(config["map"], dom, target)
    tol = float(config.get("tolerance", 1e-9))
    eps = float(config.get("zero_eps", 1e-12))
    seed = int(config.get("seed", 0))
    params = _density_params(config)
    pulled = pullback(fmap, omega)
    pulled_d = pullback(fmap, exterior_derivative(omega))
    T = zero_set(pulled, eps)
    spec = dict(config.get("probes", {}))
    spec.setdefault("kind", "scan")
    pts = _probes(spec, box, float(params["r0"]), seed, T.contains)
    rows = []
    for k, P in enumerate(pts.T):
        report, verdict = _probe_density(T, P, params, seed, k)
        res = float(entry_max_norm(pulled_d, P))
        rows.append(_probe_row(P, T(P), report, verdict, res, tol))
    summary = _slope_summary(rows)
    summary["pulled_back"] = str(pulled)
    summary["pulled_back_d"] = str(pulled_d)
    notes = [] if rows else ["empty tangency set on the scan grid: vacuous pass"]
    return ExperimentReport("tangency", _verdict(rows), config, rows, summary, notes)


def run_cor52(config: dict) -> ExperimentReport:
    """Agreement set ``{f^* Gamma = phi}`` versus the Maurer-Cartan residual of ``phi``."""
    box = [list(map(float, b)) for b in config["box"]]
    dom = domain_from_json(box)
    G = chart(config["chart"])
    fmap = parse_map(config["map"], dom, G.domain)
    phi = parse_form(config["phi"], dom, 1)
    tol = float(config.get("tolerance", 1e-9))
    eps = float(config.get("agreement_eps", 1e-9))
    seed = int(config.get("seed", 0))
    params = _density_params(config)
    residual = mc_residual(phi)
    diff = pullback(fmap, maurer_cartan(G)) - phi

    grid = grid_points(dom, int(config.get("grid", 41)))
    res_grid = entry_max_norm(residual, grid)
    agree = entry_max_norm(diff, grid) <= eps
    summary = {
        "mc_residual_min": float(res_grid.min()),
        "mc_residual_max": float(res_grid.max()),
        "agreement_points": int(agree.sum()),
        "grid_points": int(grid.shape[1]),
    }
    if agree.any():
        summary["agreement_span"] = [[float(v) for v in grid[:, agree].min(axis=1)],
                                     [float(v) for v in grid[:, agree].max(axis=1)]]
    if res_grid.max() <= tol:
        notes = ["phi satisfies the Maurer-Cartan equation on the whole grid, so the agreement set carries no information"]
        return ExperimentReport("cor52", HYPOTHESIS_NOT_MET, config, [], summary, notes)

    A = PointSet(dom.dim, lambda X: entry_max_norm(diff, X) <= eps, None, "agreement", box=dom.box)
    spec = dict(config.get("probes", {}))
    spec.setdefault("kind", "scan")
    pts = _probes(spec, box, float(params["r0"]), seed, A.contains)
    rows = []
    for k, P in enumerate(pts.T):
        report, verdict = _probe_density(A, P, params, seed, k)
        res = float(entry_max_norm(residual, P))
        rows.append(_probe_row(P, A(P), report, verdict, res, tol))
    summary.update(_slope_summary(rows))
    notes = []
    if res_grid.min() <= tol:
        notes.append("Maurer-Cartan residual vanishes at some grid points")
    if not rows:
        notes.append("empty agreement set on the scan grid: vacuous pass")
    return ExperimentReport("cor52", _verdict(rows), config, rows, summary, notes)


HARNESSES = {"thm31": run_thm31, "tangency": run_tangency, "cor52": run_cor52}


def run_experiment(config: dict, harness: Optional[str] = None) -> ExperimentReport:
    name = harness or config.get("harness")
    if name not in HARNESSES:
        raise DomainError(f"unknown harness {name!r}; known: {sorted(HARNESSES)}")
    return HARNESSES[name](config)

