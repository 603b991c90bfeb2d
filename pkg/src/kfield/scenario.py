"""Declarative experiment scenarios: parsing, execution and report comparison.

A scenario is a JSON document::

    {
      "schema_version": 1,
      "name": "oscillator",
      "particle": {"m": 1.0, "e": 0.0},
      "potential": {"kind": "harmonic", "parameters": {"k": 100.0}},
      "constants": {"c": 1.0, "hbar": 1.0},
      "initial": {"t": 0.0, "x": [0.05, 0, 0], "v": [0, 0, 0]},
      "integrator": {"scheme": "rk4", "h": 0.001, "n": 600},
      "exclusion": {"goo_below_fraction": 0.19},
      "checks": {"isotropy": {}, "geodesic": {"tol": 1e-6}},
      "output": "out",
      "seed": 0
    }

Only ``name`` and ``potential.kind`` are mandatory; everything else has the
defaults in :data:`DEFAULTS` and :data:`DEFAULT_TOLERANCES`.
"""
from __future__ import annotations

import copy
import datetime
import json
import math
import os
import platform
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import (State, diagnose, four_momentum, integrate_newton, metric_for,
                       write_trajectory_csv)
from .errors import KFieldError, MismatchError, ParseError, SchemaError
from .potentials import KINDS, OPTIONAL, Particle, make_potential
from .stability import stationary_scan, write_scan_csv
from .waves import Grid1p1, null_dispersion_scan, write_dispersion_csv

SCHEMA_VERSION = 1
TRAJECTORY_CHECKS = ("isotropy", "geodesic", "p0", "eq10")
ALL_CHECKS = TRAJECTORY_CHECKS + ("dispersion", "stability")

DEFAULT_TOLERANCES = {
    "isotropy": 1e-3,     # normalized chord residual
    "geodesic": 1e-6,     # max |R^mu| / (p^0 h)
    "p0": 1e-8,           # relative transported-vs-closed-form drift
    "eq10": 1e-9,         # closure residual per unit x^0 step
    "dispersion": 1e-3,   # relative null phase-velocity error
    "stability": 1e-2,    # |lambda| declared stable
}

CHECK_OPTIONS = {
    "isotropy": {},
    "geodesic": {},
    "p0": {},
    "eq10": {},
    "dispersion": {"goo": [0.04, 0.25, 0.81], "kx": [1.0, 2.0, 3.0], "nx": 256,
                   "length": 2 * math.pi, "cfl": 0.5},
    "stability": {"energies": None, "expect_unstable": [], "samples": 8, "horizon": 1000.0, "renorm": 1.0, "h": 0.05},
}

DEFAULTS = {
    "particle": {"m": 1.0, "e": 0.0},
    "constants": {"c": 1.0, "hbar": 1.0},
    "initial": {"t": 0.0, "x": [0.0, 0.0, 0.0], "v": [0.0, 0.0, 0.0]},
    "integrator": {"scheme": "rk4", "h": 1e-3, "n": 1000},
    "exclusion": {"goo_below_fraction": 0.0},
}

TOP_KEYS = {"schema_version", "name", "particle", "potential", "constants", "initial",
            "integrator", "exclusion", "checks", "output", "seed"}


@dataclass
class Scenario:
    name: str
    potential_kind: str
    potential_params: dict = field(default_factory=dict)
    particle: dict = field(default_factory=lambda: dict(DEFAULTS["particle"]))
    constants: dict = field(default_factory=lambda: dict(DEFAULTS["constants"]))
    initial: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS["initial"]))
    integrator: dict = field(default_factory=lambda: dict(DEFAULTS["integrator"]))
    exclusion: dict = field(default_factory=lambda: dict(DEFAULTS["exclusion"]))
    checks: dict = field(default_factory=dict)
    output: str | None = None
    seed: int = 0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "name": self.name,
            "particle": dict(self.particle),
            "potential": {"kind": self.potential_kind, "parameters": copy.deepcopy(self.potential_params)},
            "constants": dict(self.constants),
            "initial": copy.deepcopy(self.initial),
            "integrator": dict(self.integrator),
            "exclusion": dict(self.exclusion),
            "checks": copy.deepcopy(self.checks),
            "output": self.output,
            "seed": self.seed,
        }

    def particle_obj(self):
        return Particle(self.particle["m"], self.particle["e"])

    def potential_obj(self):
        return make_potential(self.potential_kind, self.potential_params)


def _is_number(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _number(obj, key, path, positive=False, integer=False):
    v = obj[key]
    p = f"{path}.{key}" if path else key
    if integer:
        if not isinstance(v, int) or isinstance(v, bool):
            raise SchemaError(p, f"expected an integer, got {v!r}")
    elif not _is_number(v):
        raise SchemaError(p, f"expected a finite number, got {v!r}")
    if positive and not v > 0:
        raise SchemaError(p, f"must be > 0, got {v!r}")
    return v


def _vector(obj, key, path):
    v = obj[key]
    p = f"{path}.{key}"
    if not (isinstance(v, list) and len(v) == 3 and all(_is_number(u) for u in v)):
        raise SchemaError(p, f"expected a list of 3 numbers, got {v!r}")
    return [float(u) for u in v]


def _section(doc, key, strict, allowed, path=None):
    p = f"{path}.{key}" if path else key
    raw = doc.get(key, {})
    if not isinstance(raw, dict):
        raise SchemaError(p, "expected an object")
    unknown = sorted(set(raw) - set(allowed))
    if unknown and strict:
        raise SchemaError(f"{p}.{unknown[0]}", "unknown key")
    return {k: v for k, v in raw.items() if k in allowed}


def parse_scenario(text, strict=True):
    """Parse and validate a scenario document, filling defaults.

    Raises :class:`ParseError` for malformed JSON and :class:`SchemaError`
    (carrying the dotted path) for missing or invalid fields.  With
    ``strict`` unknown keys are rejected; otherwise they are dropped.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from None
    return scenario_from_dict(doc, strict)


def scenario_from_dict(doc, strict=True):
    if not isinstance(doc, dict):
        raise SchemaError("", "scenario must be a JSON object")
    unknown = sorted(set(doc) - TOP_KEYS)
    if unknown and strict:
        raise SchemaError(unknown[0], "unknown key")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError("schema_version", f"unsupported version {version!r}")
    if "name" not in doc:
        raise SchemaError("name", "missing required field")
    if not isinstance(doc["name"], str) or not doc["name"]:
        raise SchemaError("name", "expected a non-empty string")

    particle = {**DEFAULTS["particle"], **_section(doc, "particle", strict, ["m", "e"])}
    _number(particle, "m", "particle", positive=True)
    _number(particle, "e", "particle")

    if "potential" not in doc:
        raise SchemaError("potential", "missing required field")
    pot = _section(doc, "potential", strict, ["kind", "parameters"])
    if "kind" not in pot:
        raise SchemaError("potential.kind", "missing required field")
    kind = pot["kind"]
    if kind not in KINDS:
        raise SchemaError("potential.kind", f"unknown kind {kind!r}; expected one of {sorted(KINDS)}")
    required = KINDS[kind][1]
    params = _section(pot, "parameters", strict, required + OPTIONAL.get(kind, []), "potential")
    for key in required:
        if key not in params:
            raise SchemaError(f"potential.parameters.{key}", "missing required parameter")
    for key, val in params.items():
        p = f"potential.parameters.{key}"
        if key in ("F", "center"):
            _vector(params, key, "potential.parameters")
        elif key in ("x", "V"):
            if not (isinstance(val, list) and len(val) >= 3 and all(_is_number(u) for u in val)):
                raise SchemaError(p, "expected a list of at least 3 numbers")
        elif not _is_number(val):
            raise SchemaError(p, f"expected a finite number, got {val!r}")
    if kind == "user-table" and len(params["x"]) != len(params["V"]):
        raise SchemaError("potential.parameters.V", "length differs from potential.parameters.x")

    constants = {**DEFAULTS["constants"], **_section(doc, "constants", strict, ["c", "hbar"])}
    _number(constants, "c", "constants", positive=True)
    _number(constants, "hbar", "constants", positive=True)

    initial = {**copy.deepcopy(DEFAULTS["initial"]), **_section(doc, "initial", strict, ["t", "x", "v"])}
    _number(initial, "t", "initial")
    initial["x"] = _vector(initial, "x", "initial")
    initial["v"] = _vector(initial, "v", "initial")

    integ = {**DEFAULTS["integrator"], **_section(doc, "integrator", strict, ["scheme", "h", "n"])}
    if integ["scheme"] not in ("rk4", "leapfrog"):
        raise SchemaError("integrator.scheme", f"expected 'rk4' or 'leapfrog', got {integ['scheme']!r}")
    _number(integ, "h", "integrator", positive=True)
    _number(integ, "n", "integrator", positive=True, integer=True)

    excl = {**DEFAULTS["exclusion"], **_section(doc, "exclusion", strict, ["goo_below_fraction"])}
    frac = _number(excl, "goo_below_fraction", "exclusion")
    if not 0 <= frac < 1:
        raise SchemaError("exclusion.goo_below_fraction", "must lie in [0, 1)")

    raw_checks = doc.get("checks", {c: {} for c in TRAJECTORY_CHECKS})
    if not isinstance(raw_checks, dict):
        raise SchemaError("checks", "expected an object")
    checks = {}
    for name, opts in raw_checks.items():
        p = f"checks.{name}"
        if name not in ALL_CHECKS:
            if strict:
                raise SchemaError(p, f"unknown check; expected one of {list(ALL_CHECKS)}")
            continue
        if opts is False:
            continue
        if opts is True or opts is None:
            opts = {}
        if not isinstance(opts, dict):
            raise SchemaError(p, "expected an object or boolean")
        allowed = ["tol"] + list(CHECK_OPTIONS[name])
        unknown = sorted(set(opts) - set(allowed))
        if unknown and strict:
            raise SchemaError(f"{p}.{unknown[0]}", "unknown key")
        merged = {"tol": DEFAULT_TOLERANCES[name], **CHECK_OPTIONS[name],
                  **{k: v for k, v in opts.items() if k in allowed}}
        _number(merged, "tol", p, positive=True)
        _validate_check_options(name, merged, p)
        checks[name] = merged

    output = doc.get("output")
    if output is not None and not isinstance(output, str):
        raise SchemaError("output", "expected a string")
    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise SchemaError("seed", "expected a non-negative integer")

    return Scenario(doc["name"], kind, params, particle, constants, initial, integ, excl,
                    checks, output, seed, version)


def _validate_check_options(name, opts, path):
    if name == "dispersion":
        for key in ("goo", "kx"):
            v = opts[key]
            if not (isinstance(v, list) and v and all(_is_number(u) and u > 0 for u in v)):
                raise SchemaError(f"{path}.{key}", "expected a non-empty list of positive numbers")
        if any(g > 1 for g in opts["goo"]):
            raise SchemaError(f"{path}.goo", "values must lie in (0, 1]")
        _number(opts, "nx", path, positive=True, integer=True)
        _number(opts, "length", path, positive=True)
        _number(opts, "cfl", path, positive=True)
        if opts["cfl"] > 1:
            raise SchemaError(f"{path}.cfl", "must not exceed 1")
    elif name == "stability":
        E = opts["energies"]
        if E is not None and not (isinstance(E, list) and all(_is_number(u) for u in E)):
            raise SchemaError(f"{path}.energies", "expected a list of numbers")
        U = opts["expect_unstable"]
        if not (isinstance(U, list) and all(_is_number(u) for u in U)):
            raise SchemaError(f"{path}.expect_unstable", "expected a list of numbers")
        if any(u not in (E or []) for u in U):
            raise SchemaError(f"{path}.expect_unstable", "every entry must also appear in energies")
        _number(opts, "samples", path, positive=True, integer=True)
        for key in ("horizon", "renorm", "h"):
            _number(opts, key, path, positive=True)


def serialize_scenario(scenario):
    return json.dumps(scenario.to_dict(), indent=2, sort_keys=True)


def load_scenario(path, strict=True):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_scenario(text, strict)


# --------------------------------------------------------------------------- running


def _finite_max(values, mask=None):
    v = np.abs(np.asarray(values, dtype=float))
    if mask is not None:
        v = v[mask]
    v = v[np.isfinite(v)]
    return float(v.max()) if v.size else 0.0


def _entry(name, max_residual, tol, excluded=(), **extra):
    return {"name": name, "max_residual": max_residual, "tolerance": tol,
            "pass": bool(max_residual <= tol), "excluded_steps": list(excluded), **extra}


def _error_entry(name, tol, exc):
    return {"name": name, "max_residual": None, "tolerance": tol, "pass": False,
            "excluded_steps": [], "error": f"{type(exc).__name__}: {exc}"}


def _trajectory_checks(s, wanted, outdir):
    particle, potential = s.particle_obj(), s.potential_obj()
    c = s.constants["c"]
    init = State(s.initial["t"], s.initial["x"], s.initial["v"], c)
    traj = integrate_newton(particle, potential, init, s.integrator["h"], s.integrator["n"],
                            s.integrator["scheme"])
    metric = metric_for(traj)
    diag = diagnose(traj, metric, s.exclusion["goo_below_fraction"])
    keep = ~diag.excluded
    excluded = [int(i) for i in np.flatnonzero(diag.excluded)]
    turning = [int(i) for i in diag.turning_steps]
    entries = []
    for name in wanted:
        tol = s.checks[name]["tol"]
        if name == "isotropy":
            entries.append(_entry(name, _finite_max(diag.iso, keep), tol, excluded,
                                  turning_point_steps=turning))
        elif name == "geodesic":
            entries.append(_entry(name, _finite_max(diag.geo, keep), tol, excluded,
                                  turning_point_steps=turning))
        elif name == "eq10":
            entries.append(_entry(name, _finite_max(diag.eq10, keep), tol, excluded,
                                  turning_point_steps=turning))
        elif name == "p0":
            state_ok = np.ones(traj.n_steps + 1, dtype=bool)
            state_ok[np.flatnonzero(diag.excluded)] = False
            state_ok[np.flatnonzero(diag.excluded) + 1] = False
            fm = four_momentum(traj, metric, mask=state_ok)
            entries.append(_entry(name, fm.max_rel_drift, tol, excluded, turning_point_steps=turning,
                                  reanchored=[int(i) for i in fm.reanchored]))
    if outdir is not None:
        write_trajectory_csv(outdir / "trajectory.csv", traj, diag)
    return entries


def _dispersion_check(s, outdir):
    opts = s.checks["dispersion"]
    c = s.constants["c"]
    results = []
    worst = 0.0
    for g in opts["goo"]:
        grid = Grid1p1.periodic_box(opts["length"], opts["nx"], 3, opts["cfl"], g, c)
        res = null_dispersion_scan(g, opts["kx"], grid, c)
        results += res
        for r in res:
            worst = max(worst, abs(r.phase_velocity - c * math.sqrt(g)) / (c * math.sqrt(g)))
    if outdir is not None:
        write_dispersion_csv(outdir / "dispersion.csv", results)
    return _entry("dispersion", worst, opts["tol"])


def _stability_check(s, outdir):
    opts = s.checks["stability"]
    particle, potential = s.particle_obj(), s.potential_obj()
    energies = opts["energies"]
    if energies is None:
        x, v = np.array(s.initial["x"]), np.array(s.initial["v"])
        energies = [float(0.5 * particle.m * v @ v + potential.V(x))]
    scan = stationary_scan(particle, potential, energies, n_samples=opts["samples"],
                           horizon=opts["horizon"], renorm_interval=opts["renorm"], h=opts["h"],
                           seed=s.seed, tol=opts["tol"], c=s.constants["c"])
    if outdir is not None:
        write_scan_csv(outdir / "scan.csv", scan)
    expected = [i for i, E in enumerate(scan.energies) if E in opts["expect_unstable"]]
    lam = [abs(v) for i, v in enumerate(scan.lambda_raw) if i not in expected and math.isfinite(v)]
    entry = _entry("stability", max(lam) if lam else 0.0, opts["tol"], expected,
                   unstable_energies=scan.unstable_band(),
                   not_converged=[scan.energies[i] for i in scan.not_converged])
    missed = [scan.energies[i] for i in expected if scan.classification[i] != "unstable"]
    if missed:
        entry["pass"] = False
        entry["expected_unstable_missed"] = missed
    if scan.failures:
        entry["pass"] = False
        entry["error"] = "; ".join(scan.failures.values())
    return entry


def run_scenario(s, out=None, artifacts=True, only=None):
    """Execute the requested checks and write ``report.json`` (plus CSVs).

    Returns ``(report, exit_code)`` with exit code 0 when every check
    passes, 2 when a check fails and 1 when a check raised an error.
    """
    base = Path(out if out is not None else (s.output or os.environ.get("KFIELD_OUT", "kfield_out")))
    outdir = base / s.name
    outdir.mkdir(parents=True, exist_ok=True)
    csv_dir = outdir if artifacts else None
    wanted = [c for c in ALL_CHECKS if c in s.checks and (only is None or c in only)]

    entries = []
    traj_wanted = [c for c in wanted if c in TRAJECTORY_CHECKS]
    if traj_wanted:
        try:
            entries += _trajectory_checks(s, traj_wanted, csv_dir)
        except (KFieldError, ValueError, KeyError) as exc:
            entries += [_error_entry(c, s.checks[c]["tol"], exc) for c in traj_wanted]
    for name, fn in (("dispersion", _dispersion_check), ("stability", _stability_check)):
        if name in wanted:
            try:
                entries.append(fn(s, csv_dir))
            except (KFieldError, ValueError, KeyError) as exc:
                entries.append(_error_entry(name, s.checks[name]["tol"], exc))

    report = {
        "scenario": s.name,
        "schema_version": s.schema_version,
        "checks": entries,
        "tolerances": {c: s.checks[c]["tol"] for c in wanted},
        "environment": {
            "version": __version__,
            "seed": s.seed,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        },
    }
    code = exit_code(report)
    report["exit_code"] = code
    (outdir / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report, code


def exit_code(report):
    if any("error" in c for c in report["checks"]):
        return 1
    return 0 if all(c["pass"] for c in report["checks"]) else 2


def strip_volatile(report):
    """Report without the timestamp, for bit-level comparisons."""
    r = copy.deepcopy(report)
    r.get("environment", {}).pop("timestamp", None)
    return r


def compare_runs(report_a, report_b, factor=2.0):
    """Per-check residual ratios ``a / b`` for checks whose residual changed.

    A check regresses when ``b`` is more than ``factor`` times worse than
    ``a``.  Identical reports give an empty ``rows`` list.
    """
    if report_a["scenario"] != report_b["scenario"]:
        raise MismatchError(f"scenario {report_a['scenario']!r} vs {report_b['scenario']!r}")
    b_checks = {c["name"]: c for c in report_b["checks"]}
    rows = []
    for ca in report_a["checks"]:
        cb = b_checks.get(ca["name"])
        if cb is None:
            continue
        a, b = ca["max_residual"], cb["max_residual"]
        if a == b:
            continue
        if a is None or b is None:
            ratio = None
        elif b == 0:
            ratio = math.inf
        else:
            ratio = a / b
        regression = a is not None and b is not None and b > factor * a
        rows.append({"name": ca["name"], "a": a, "b": b, "ratio": ratio, "regression": regression})
    return {"scenario": report_a["scenario"], "rows": rows,
            "regressions": [r["name"] for r in rows if r["regression"]]}
