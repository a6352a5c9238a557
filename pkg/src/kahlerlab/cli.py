"""Command-line front end.

    kahlerlab analyze   --config cfg.json [--out DIR] [--format json|md|csv]
    kahlerlab reproduce [--out DIR] [--format md|json]
    kahlerlab sweep     --config cfg.json [--out DIR] [--threads N] [--format csv|json]
    kahlerlab verify    [--level fast|full] [--out DIR]

Exit codes: 0 ok, 1 verification failure, 2 usage or config error, 3 internal error.
"""
from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .curvature import probe_t, ricci_point
from .errors import ConfigError, KahlerLabError
from .geometry import RadialMetric, RadialModulus, diameter, dini_transform
from .integrability import condition_k_radial, orlicz_radial, power_h
from .report import (AnalysisReport, build_profile, build_report, build_weight, load_config, report_curves,
                     rows_to_csv, _clean)

EXIT_OK, EXIT_VERIFY, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        _emit_error("UsageError", message)
        raise SystemExit(EXIT_USAGE)


def _emit_error(kind, message):
    print(json.dumps({"error": {"type": kind, "message": message}}))


def _write(out, name, text):
    os.makedirs(os.path.dirname(os.path.join(out, name)) or out, exist_ok=True)
    with open(os.path.join(out, name), "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# -- analyze -------------------------------------------------------------------------------
def _markdown_summary(rep: AnalysisReport) -> str:
    prof = rep.profile
    title = prof.get("expr") or prof["kind"]
    params = ", ".join(f"{k} = {v:g}" for k, v in prof["params"].items())
    lines = [f"# {title} ({params})", "", f"n = {rep.n}, eps = {rep.eps:g}", "",
             "| quantity | verdict |", "|---|---|",
             f"| diameter | {rep.diameter['class']} |",
             f"| modulus decay | {rep.modulus['decay_class']} (exponent {rep.modulus['exponent']}) |",
             f"| Dini transform | {rep.dini['class']} |",
             f"| Condition (K), h = {rep.condition_k['h']} | {rep.condition_k['class']} |",
             f"| Ricci lower bound | {rep.ricci['bound'].get('label', rep.ricci['bound']['verdict'])} |"]
    for o in rep.orlicz:
        lines.append(f"| Orlicz {o['weight']} | {o['class']} |")
    return "\n".join(lines) + "\n"


def cmd_analyze(args):
    cfg = load_config(args.config)
    rep = build_report(cfg)
    if args.out:
        _write(args.out, "report.json", rep.to_json() + "\n")
        for name, text in report_curves(rep).items():
            _write(args.out, os.path.join("curves", name), text)
    if args.format == "md":
        sys.stdout.write(_markdown_summary(rep))
    elif args.format == "csv":
        sys.stdout.write(report_curves(rep)["ricci.csv"])
    else:
        print(rep.to_json())
    return EXIT_OK


# -- reproduce -----------------------------------------------------------------------------
def cmd_reproduce(args):
    from .reproduce import run_table, to_json, to_markdown

    rows = run_table()
    md, js = to_markdown(rows), to_json(rows)
    if args.out:
        _write(args.out, "reproduce.md", md)
        _write(args.out, "reproduce.json", js + "\n")
    sys.stdout.write(js + "\n" if args.format == "json" else md)
    return EXIT_OK if all(r.passed for r in rows) else EXIT_VERIFY


# -- sweep ---------------------------------------------------------------------------------
def _mu_min(profile, n, eps):
    """Smallest mu / psi (Ricci radial eigenvalue relative to the metric) along
    the probe curves |z|^2 = eps^2 (-log eps)^a, a in [0, 3]."""
    m = RadialMetric(profile, n, eps)
    best = math.inf
    for i in range(31):
        a = 0.1 * i
        t = probe_t(eps, a) if a > 0 else 2 * math.log(eps) + math.log(2.0)
        if t >= profile.anchor:
            continue
        p = ricci_point(m, t)
        best = min(best, p.mu / p.weight_radial)
    if best == math.inf:
        raise ConfigError(f"eps={eps:g}: no probe point lies inside the profile window")
    return best


def _sweep_point(job):
    cfg, value = job
    cfg = copy.deepcopy(cfg)
    sw = cfg["sweep"]
    param, q = sw["param"], sw["quantity"]
    if param == "eps":
        cfg["eps"] = value
    elif param == "n":
        cfg["n"] = int(value)
    elif param.startswith("weight."):
        cfg["weights"][0][param.split(".", 1)[1]] = value
    else:
        cfg["profile"]["params"][param] = value
    try:
        profile = build_profile(cfg["profile"])
        n, tol = cfg["n"], cfg["tol"]
        if q == "mu_min":
            v = _mu_min(profile, n, cfg["eps"])
            return {"class": "Value", "value": v, "error_estimate": None, "diagnostics": {"quantity": "min mu/psi"}}
        if q == "diameter":
            verdict = diameter(RadialMetric(profile, n), tol=tol)
        elif q == "dini":
            verdict = dini_transform(RadialModulus(profile), math.exp(min(profile.anchor, -1.0)), tol)
        elif q == "condition_k":
            verdict = condition_k_radial(profile, n, power_h(cfg["h_exponent"]), tol=tol)
        else:
            verdict = orlicz_radial(profile, n, build_weight(cfg["weights"][0], n), tol=tol)
        d = verdict.to_dict()
        return {"class": d["class"], "value": d["value"], "error_estimate": d["error_estimate"], "diagnostics": d}
    except KahlerLabError as e:
        return {"class": "Error", "value": None, "error_estimate": None,
                "diagnostics": {"error": type(e).__name__, "message": str(e)}}


def run_sweep(cfg, threads=1):
    """(csv text, diagnostics json text); identical for every thread count."""
    if "sweep" not in cfg:
        raise ConfigError("config has no 'sweep' section")
    values = cfg["sweep"]["values"]
    if not values:
        raise ConfigError("sweep grid is empty")
    jobs = [(cfg, v) for v in values]
    if threads <= 1:
        results = [_sweep_point(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(_sweep_point, jobs, chunksize=max(1, len(jobs) // (4 * threads))))
    rows, diags = [], []
    for i, (v, r) in enumerate(zip(values, results)):
        rows.append({"param": v, "class": r["class"], "value": r["value"], "error_estimate": r["error_estimate"],
                     "diagnostics_ref": f"sweep_diagnostics.json#{i}"})
        diags.append({"index": i, "param": v, **_clean(r["diagnostics"])})
    return rows_to_csv(rows), json.dumps(diags, indent=1, sort_keys=True) + "\n"


def cmd_sweep(args):
    cfg = load_config(args.config)
    csv_text, diag_text = run_sweep(cfg, args.threads)
    if args.out:
        _write(args.out, "sweep.csv", csv_text)
        _write(args.out, "sweep_diagnostics.json", diag_text)
    if args.format == "json":
        sys.stdout.write(diag_text)
    else:
        sys.stdout.write(csv_text)
    return EXIT_OK


# -- verify --------------------------------------------------------------------------------
def cmd_verify(args):
    from .invariants import run_checks, to_junit

    def show(r):
        status = "PASS" if r.passed else "FAIL"
        line = f"{status} {r.check.id} ({r.seconds:.2f}s)"
        if not r.passed:
            line += f": {r.message.splitlines()[0]}"
        print(line, flush=True)

    results = run_checks(args.level, show)
    xml = to_junit(results, args.level)
    _write(args.out or ".", "verify-junit.xml", xml)
    failed = [r.check.id for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} invariants passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_VERIFY if failed else EXIT_OK


# -- entry ---------------------------------------------------------------------------------
def build_parser():
    p = _Parser(prog="kahlerlab", description="Radial Kähler metric analysis.")
    p.add_argument("--version", action="version", version=f"kahlerlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="analyze one profile and write report.json")
    a.add_argument("--config", required=True)
    a.add_argument("--out")
    a.add_argument("--format", choices=("json", "md", "csv"), default="json")
    a.set_defaults(fn=cmd_analyze)

    r = sub.add_parser("reproduce", help="evaluate the example-threshold table")
    r.add_argument("--out")
    r.add_argument("--format", choices=("md", "json"), default="md")
    r.set_defaults(fn=cmd_reproduce)

    s = sub.add_parser("sweep", help="classify a quantity over a parameter grid")
    s.add_argument("--config", required=True)
    s.add_argument("--out")
    s.add_argument("--threads", type=int, default=1)
    s.add_argument("--format", choices=("csv", "json"), default="csv")
    s.set_defaults(fn=cmd_sweep)

    v = sub.add_parser("verify", help="run the invariant suites")
    v.add_argument("--level", choices=("fast", "full"), default="fast")
    v.add_argument("--out")
    v.set_defaults(fn=cmd_verify)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    if getattr(args, "threads", 1) < 1:
        _emit_error("UsageError", "--threads must be >= 1")
        return EXIT_USAGE
    try:
        return args.fn(args)
    except KahlerLabError as e:
        _emit_error(type(e).__name__, str(e))
        return EXIT_USAGE
    except Exception as e:  # pragma: no cover - last-resort guard
        _emit_error("InternalError", f"{type(e).__name__}: {e}")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
