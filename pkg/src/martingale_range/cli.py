"""``martingale-range`` command line: verify, fuzz, witness, lorentz."""

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
from fractions import Fraction

from . import __version__
from .suites import RANDOM_SUITES, RNG_ALGORITHM, SUITES, Settings, run_case, suite_cases

EXIT_OK, EXIT_VIOLATION, EXIT_INPUT = 0, 1, 2
SCHEMA = 1


class InputError(Exception):
    pass


def _parse_suites(text: str | None, default: list[str]) -> list[str]:
    if not text:
        return list(default)
    names = [s.strip() for s in text.split(",") if s.strip()]
    if names == ["all"]:
        return list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise InputError(f"unknown suite(s): {', '.join(unknown)}")
    return names


def _run_suite(name, cases, seed, settings, jobs):
    work = [(name, i, seed, settings) for i in range(cases)]
    if jobs > 1 and cases > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_case, work, chunksize=max(1, cases // (4 * jobs))))
    else:
        results = [run_case(w) for w in work]
    case_rows = []
    passed = 0
    violations = []
    margins = []
    for i, reports in enumerate(results):
        ok = all(r["status"] == "pass" for r in reports)
        passed += ok
        case_rows.append({"index": i, "status": "pass" if ok else "fail",
                          "claims": [[r["claim"], r["status"]] for r in reports]})
        for r in reports:
            if r.get("margin") is not None:
                margins.append(r["margin"])
            if r["status"] != "pass":
                violations.append({"index": i, **r})
    summary = {"cases": cases, "passed": passed, "failed": cases - passed,
               "violations": violations, "results": case_rows}
    if name == "empirical-constant" and margins:
        summary["sup_ratio"] = max(margins)
        summary["snapshot"] = [round(m, 12) for m in margins[:8]]
    if name == "lorentz":
        summary["values"] = {r["claim"]: r.get("margin") for r in results[0]}
    return summary


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _verify_csv(manifest) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["suite", "case", "claim", "status"])
    for name, s in manifest["suites"].items():
        for row in s["results"]:
            for claim, status in row["claims"]:
                w.writerow([name, row["index"], claim, status])
    return buf.getvalue()


def cmd_verify(args, default_suites) -> int:
    names = _parse_suites(args.suite, default_suites)
    if args.cases is not None and args.cases < 1:
        raise InputError("--cases must be positive")
    if args.depth < 1 or args.grid_depth < 1 or args.jobs < 1:
        raise InputError("--depth, --grid-depth and --jobs must be positive")
    if args.max_level is not None and not 0 <= args.max_level <= 16:
        raise InputError("--max-level must lie in 0..16")
    settings = Settings(args.depth, args.grid_depth, args.max_level)
    start = time.perf_counter()
    suites = {}
    for name in names:
        suites[name] = _run_suite(name, suite_cases(name, args.cases, settings), args.seed,
                                  settings, args.jobs)
    manifest = {
        "schema": SCHEMA,
        "tool": "martingale-range",
        "version": __version__,
        "config": {"suites": names, "cases": args.cases, "depth": args.depth,
                   "grid_depth": args.grid_depth, "seed": args.seed, "max_level": args.max_level},
        "rng": RNG_ALGORITHM,
        "counts": {n: {"cases": s["cases"], "passed": s["passed"], "failed": s["failed"]}
                   for n, s in suites.items()},
        "suites": suites,
        "wall_time": round(time.perf_counter() - start, 3),
    }
    if args.format == "csv":
        _emit(_verify_csv(manifest), args.out)
    else:
        _emit(json.dumps(manifest, indent=2, sort_keys=True) + "\n", args.out)
    failed = sum(s["failed"] for s in suites.values())
    for n, s in suites.items():
        print(f"{n}: {s['passed']}/{s['cases']} passed", file=sys.stderr)
    return EXIT_VIOLATION if failed else EXIT_OK


# --------------------------------------------------------------------------
# witness
# --------------------------------------------------------------------------

WITNESS_KINDS = ("f1", "f2", "f", "Tf", "Smu")


def _load_step(path):
    from .dyadic_step import DyadicStep

    try:
        with open(path) as fh:
            return DyadicStep.from_json(json.load(fh))
    except (OSError, ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
        raise InputError(f"cannot read step function from {path}: {exc}") from exc


def witness_objects(x, emit, depth: int = 0) -> dict:
    from .calderon_ops import calderon_S
    from .dyadic_step import rearrange
    from .haar_martingale import transform_T
    from .witness_verifier import build_f, build_f1, build_f2

    mu = rearrange(x)
    out = {}
    for kind in emit:
        if kind == "f1":
            out[kind] = build_f1(mu, depth).to_json()
        elif kind == "f2":
            out[kind] = build_f2(mu, depth).to_json()
        elif kind == "f":
            out[kind] = build_f(mu, depth).to_json()
        elif kind == "Tf":
            out[kind] = transform_T(build_f(mu, depth)).to_json()
        elif kind == "Smu":
            out[kind] = calderon_S(mu).to_json()
    return out


def cmd_witness(args) -> int:
    emit = [e.strip() for e in args.emit.split(",") if e.strip()]
    bad = [e for e in emit if e not in WITNESS_KINDS]
    if bad or not emit:
        raise InputError(f"--emit takes a subset of {','.join(WITNESS_KINDS)}")
    x = _load_step(args.input)
    objs = witness_objects(x, emit, args.depth)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        for k, v in objs.items():
            with open(os.path.join(args.out, f"{k}.json"), "w") as fh:
                json.dump({"schema": SCHEMA, "kind": k, "data": v}, fh, indent=2, sort_keys=True)
                fh.write("\n")
    else:
        sys.stdout.write(json.dumps({"schema": SCHEMA, **objs}, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------
# lorentz
# --------------------------------------------------------------------------


def parse_grid(text: str) -> list[float]:
    """``2^-a..2^-b`` (all powers between) or a comma-separated list of floats."""
    text = text.replace(" ", "")
    if ".." in text:
        lo, hi = text.split("..")
        try:
            a, b = (int(p.split("^", 1)[1]) for p in (lo, hi))
        except (IndexError, ValueError) as exc:
            raise InputError(f"bad grid {text!r}") from exc
        step = 1 if b >= a else -1
        us = [2.0 ** e for e in range(a, b + step, step)]
    else:
        try:
            us = [float(p) for p in text.split(",") if p]
        except ValueError as exc:
            raise InputError(f"bad grid {text!r}") from exc
    if not us or any(not 0 < u < 1 for u in us):
        raise InputError("grid points must lie in (0,1)")
    return us


def _table(rows, fmt, extra=None) -> str:
    if fmt == "json":
        return json.dumps({"schema": SCHEMA, "rows": rows, **(extra or {})}, indent=2,
                          sort_keys=True) + "\n"
    buf = io.StringIO()
    if rows:
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    for k, v in (extra or {}).items():
        buf.write(f"# {k}={v}\n")
    return buf.getvalue()


def cmd_lorentz(args) -> int:
    from .lorentz_range import (
        PsiFunction,
        check_SE_membership,
        criterion_scan,
        lorentz_norm,
        parse_gauge,
    )

    try:
        phi = parse_gauge(args.gauge)
    except (ValueError, OSError, KeyError) as exc:
        raise InputError(str(exc)) from exc
    psi = PsiFunction(phi)
    if args.action == "psi":
        grid = parse_grid(args.grid or "2^-1..2^-20")
        text = _table([{"u": u, "psi": psi(u)} for u in grid], args.format)
    elif args.action == "criterion":
        scan = criterion_scan(phi, psi, depth=args.depth)
        text = _table(scan.rows(), args.format,
                      {"sup_ratio": scan.sup_ratio,
                       "trend": "diverging" if scan.diverging else "bounded"})
    elif args.action == "norm":
        if not args.input:
            raise InputError("--action norm needs --input")
        x = _load_step(args.input)
        text = _table([{"norm": lorentz_norm(phi, x)}], args.format)
    else:
        if not args.input or not args.witness_y:
            raise InputError("--action membership needs --input and --y")
        ok, rep = check_SE_membership(_load_step(args.input), _load_step(args.witness_y))
        text = _table([{"member": ok, "margin": rep.get("margin")}], args.format,
                      {k: v for k, v in rep.items() if k != "margin"})
    _emit(text, args.out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="martingale-range", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, help_ in (("verify", "run verification suites"),
                        ("fuzz", "verify with every randomized suite by default")):
        v = sub.add_parser(name, help=help_)
        v.add_argument("--suite", help="comma-separated suites, or 'all': " + ", ".join(SUITES))
        v.add_argument("--cases", type=int, default=None, help="cases per randomized suite")
        v.add_argument("--depth", type=int, default=40, help="bands checked one by one")
        v.add_argument("--grid-depth", type=int, default=20, help="grid points 2^-j, j <= this")
        v.add_argument("--seed", type=int, default=0)
        v.add_argument("--jobs", type=int, default=1)
        v.add_argument("--max-level", type=int, default=None, help="finest dyadic level of inputs")
        v.add_argument("--out")
        v.add_argument("--format", choices=("json", "csv"), default="json")

    w = sub.add_parser("witness", help="emit witness functions for an input step function")
    w.add_argument("--input", required=True, help="JSON {resolution, values}")
    w.add_argument("--emit", default="f1,f2,f,Tf,Smu")
    w.add_argument("--depth", type=int, default=0, help="minimum explicit prefix depth")
    w.add_argument("--out", help="output directory (default: stdout)")

    lz = sub.add_parser("lorentz", help="gauge, psi and criterion tables")
    lz.add_argument("--gauge", required=True, help="pow:<alpha> | id | file:<path>")
    lz.add_argument("--action", choices=("psi", "criterion", "norm", "membership"), required=True)
    lz.add_argument("--grid", help="2^-a..2^-b or comma-separated values")
    lz.add_argument("--depth", type=int, default=40, help="criterion scan depth")
    lz.add_argument("--input")
    lz.add_argument("--y", dest="witness_y", help="candidate y for membership")
    lz.add_argument("--out")
    lz.add_argument("--format", choices=("json", "csv"), default="csv")
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.command == "verify":
            return cmd_verify(args, list(SUITES))
        if args.command == "fuzz":
            return cmd_verify(args, RANDOM_SUITES)
        if args.command == "witness":
            return cmd_witness(args)
        return cmd_lorentz(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
