"""``kfield`` command line: run scenario files and compare reports."""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .errors import KFieldError, MismatchError
from .scenario import CHECK_OPTIONS, DEFAULT_TOLERANCES, compare_runs, load_scenario, run_scenario

MODES = {
    "run": (None, True),
    "check": (None, False),
    "scan-stability": (("stability",), True),
    "scan-dispersion": (("dispersion",), True),
}


def _ensure_check(s, name):
    if name not in s.checks:
        s.checks[name] = {"tol": DEFAULT_TOLERANCES[name], **CHECK_OPTIONS[name]}


def _run_one(path, mode, out, seed, strict):
    only, artifacts = MODES[mode]
    try:
        s = load_scenario(path, strict=strict)
        if seed is not None:
            s.seed = seed
        if only:
            for name in only:
                _ensure_check(s, name)
        report, code = run_scenario(s, out=out, artifacts=artifacts, only=only)
    except (KFieldError, OSError) as exc:
        return path, None, 1, f"{type(exc).__name__}: {exc}"
    return path, report, code, None


def _summary(path, report, code, err):
    if err is not None:
        return f"{path}: error: {err}"
    lines = [f"{report['scenario']}: exit {code}"]
    for c in report["checks"]:
        status = "PASS" if c["pass"] else ("ERROR" if "error" in c else "FAIL")
        res = "n/a" if c["max_residual"] is None else f"{c['max_residual']:.3e}"
        extra = f" excluded={len(c['excluded_steps'])}" if c["excluded_steps"] else ""
        lines.append(f"  {status:5s} {c['name']:10s} {res} (tol {c['tolerance']:.1e}){extra}")
        if "error" in c:
            lines.append(f"        {c['error']}")
    return "\n".join(lines)


def _cmd_scenarios(args):
    paths = args.scenario
    jobs = max(1, args.jobs)
    call = [(p, args.command, args.out, args.seed, args.strict) for p in paths]
    if jobs > 1 and len(paths) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_one, *zip(*call)))
    else:
        results = [_run_one(*c) for c in call]
    for r in results:
        print(_summary(*r))
    return max(r[2] for r in results)


def _load_report(path):
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    return json.loads(p.read_text())


def _cmd_diff(args):
    try:
        diff = compare_runs(_load_report(args.a), _load_report(args.b))
    except (OSError, json.JSONDecodeError, KeyError, MismatchError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if not diff["rows"]:
        print(f"{diff['scenario']}: no differences")
        return 0
    print(f"{'check':10s} {'a':>12s} {'b':>12s} {'a/b':>10s}")
    for r in diff["rows"]:
        fmt = lambda v: "n/a" if v is None else f"{v:.4e}"
        ratio = "n/a" if r["ratio"] is None else f"{r['ratio']:.3g}"
        mark = "  REGRESSION" if r["regression"] else ""
        print(f"{r['name']:10s} {fmt(r['a']):>12s} {fmt(r['b']):>12s} {ratio:>10s}{mark}")
    return 2 if diff["regressions"] else 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", default=None,
                        help="output directory (default: $KFIELD_OUT, the scenario's 'output', or ./kfield_out)")
    common.add_argument("--jobs", metavar="N", type=int, default=1, help="scenarios run concurrently")
    common.add_argument("--seed", metavar="S", type=int, default=None, help="override the scenario seed")
    common.add_argument("--strict", action="store_true", help="reject unknown keys in scenario files")

    parser = argparse.ArgumentParser(prog="kfield", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "run": "run all requested checks and write CSV artifacts",
        "check": "run requested checks, write report.json only",
        "scan-stability": "Lyapunov scan over energies",
        "scan-dispersion": "null-wave phase-velocity scan",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("scenario", nargs="+", help="scenario JSON file(s)")
        p.set_defaults(func=_cmd_scenarios)
    p = sub.add_parser("diff", help="compare two reports (files or run directories)")
    p.add_argument("a")
    p.add_argument("b")
    p.set_defaults(func=_cmd_diff)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
