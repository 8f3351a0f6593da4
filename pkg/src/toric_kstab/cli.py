"""``toric-kstab`` command line interface.

Every subcommand writes one JSON (or CSV) report.  Exit codes: 0 success,
2 input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import random
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import dh, functionals, measures, potentials, stability
from .geometry import GeometryError, HPolytope
from .measures import AtomicMeasure
from .potentials import PLConcave, PLConvex
from .presets import PRESETS, WEIGHT_PRESETS, polytope as preset_polytope, weight_pair
from .rational import as_rational, rational_str, rvec
from .toric import CombinatorialCollapse, fan_of
from .weights import QuadratureError, Weight

COMMANDS = ("degree", "dh-push", "ma", "ma-twist", "energy", "ricci", "entropy", "mabuchi",
            "futaki", "extremal", "jmeasure", "beta", "twist-inf", "solve-ma", "envelope",
            "verdict", "selftest")


class InputError(ValueError):
    pass


def conventions_hash() -> str:
    data = resources.files("toric_kstab").joinpath("CONVENTIONS.md").read_bytes()
    return hashlib.sha256(data).hexdigest()


def _jsonable(x):
    if isinstance(x, Fraction):
        return rational_str(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _load_json(path: str, what: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {what} file {path!r}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_polytope(spec: str | None) -> HPolytope:
    if spec is None:
        raise InputError("--polytope is required")
    if spec in PRESETS:
        return preset_polytope(spec)
    data = _load_json(spec, "polytope")
    try:
        return HPolytope.from_json(data)
    except KeyError as exc:
        raise InputError(f"polytope file {spec}: missing field {exc}") from None


def load_weights(spec: str | None, P: HPolytope) -> tuple[Weight, Weight]:
    if spec is None or spec in WEIGHT_PRESETS:
        return weight_pair(spec or "unweighted", P)
    data = _load_json(spec, "weights")
    unknown = set(data) - {"v", "w"}
    if unknown:
        raise InputError(f"weights file {spec}: unknown fields {sorted(unknown)}")
    try:
        v = Weight.from_json(data["v"], P.dim) if "v" in data else Weight.constant(P.dim)
        w = Weight.from_json(data["w"], P.dim) if "w" in data else Weight.constant(P.dim)
    except KeyError as exc:
        raise InputError(f"weights file {spec}: missing field {exc}") from None
    return v, w


def load_config(spec: str | None, P: HPolytope) -> PLConcave:
    if spec is None:
        raise InputError("--config is required")
    data = _load_json(spec, "config")
    try:
        return PLConcave.from_json(P, data)
    except KeyError as exc:
        raise InputError(f"config file {spec}: missing field {exc}") from None


def load_measure(spec: str | None) -> AtomicMeasure:
    if spec is None:
        raise InputError("--measure is required")
    data = _load_json(spec, "measure")
    try:
        return AtomicMeasure.from_json(data)
    except KeyError as exc:
        raise InputError(f"measure file {spec}: missing field {exc}") from None


def load_suite(spec: str | None, P: HPolytope) -> dict:
    if spec is None:
        raise InputError("--suite is required")
    data = _load_json(spec, "suite")
    unknown = set(data) - {"directions", "measures", "configs"}
    if unknown:
        raise InputError(f"suite file {spec}: unknown fields {sorted(unknown)}")
    return {"directions": [rvec(x) for x in data.get("directions", [])],
            "measures": [AtomicMeasure.from_json(m) for m in data.get("measures", [])],
            "configs": [PLConcave.from_json(P, g) for g in data.get("configs", [])]}


def _xi(args, P) -> tuple:
    if not args.xi:
        raise InputError("--xi is required")
    xi = rvec(args.xi)
    if len(xi) != P.dim:
        raise InputError(f"--xi has {len(xi)} entries, polytope has dimension {P.dim}")
    return xi


def _num(x):
    return rational_str(x) if isinstance(x, Fraction) else float(x)


# ----------------------------------------------------------------------
# subcommands

def cmd_degree(args):
    P = load_polytope(args.polytope)
    v, _ = load_weights(args.weights, P)
    return {"volume": P.volume, "degree": dh.degree(P), "degree_v": dh.integrate_weight(P, v),
            "degree_derivative_K": dh.degree_derivative(P, v),
            "facet_sigma": list(P.facet_sigma), "vertices": [list(p) for p in P.vertices]}


def cmd_dh_push(args):
    P = load_polytope(args.polytope)
    if args.proj is None:
        raise InputError("--proj is required (JSON list of integer rows)")
    try:
        proj = json.loads(args.proj)
    except json.JSONDecodeError as exc:
        raise InputError(f"--proj: column {exc.colno}: {exc.msg}") from None
    m = dh.pushforward(P, proj)
    if m.dim == 0:
        return {"dim": 0, "atom": m.atom}
    return {"dim": m.dim, "total_mass": m.total_mass,
            "chambers": [{"polytope": Q.to_json(), "density": d.to_json()} for Q, d in m.chambers]}


def cmd_ma(args):
    P = load_polytope(args.polytope)
    v, _ = load_weights(args.weights, P)
    g = load_config(args.config, P)
    mu = measures.ma_weighted(P, fan_of(P, warn=False), v, g)
    return {"measure": mu.to_json(), "total": mu.total, "degree_v": dh.integrate_weight(P, v),
            "multiplicities": [{"xi": list(xi), "b": b} for xi, b in sorted(mu.multiplicities.items())]}


def cmd_ma_twist(args):
    P = load_polytope(args.polytope)
    v, _ = load_weights(args.weights, P)
    g = load_config(args.config, P)
    mu = measures.ma_twisted_canonical(P, fan_of(P, warn=False), v, g)
    return {"measure": mu.to_json(), "total": mu.total, "degree_derivative_K": dh.degree_derivative(P, v)}


def _energy_like(args, fn):
    P = load_polytope(args.polytope)
    v, _ = load_weights(args.weights, P)
    g = load_config(args.config, P)
    val, err = fn(P, fan_of(P, warn=False), v, g, rtol=args.tol, with_error=True)
    return {"value": val, "error": err, "degree_v": dh.integrate_weight(P, v)}


def cmd_energy(args):
    return _energy_like(args, functionals.energy_weighted)


def cmd_ricci(args):
    return _energy_like(args, functionals.ricci_energy)


def cmd_entropy(args):
    P = load_polytope(args.polytope)
    v, _ = load_weights(args.weights, P)
    g = load_config(args.config, P)
    return {"value": functionals.entropy_weighted(P, fan_of(P, warn=False), v, g), "error": 0.0,
            "degree_v": dh.integrate_weight(P, v)}


def cmd_mabuchi(args):
    P = load_polytope(args.polytope)
    v, w = load_weights(args.weights, P)
    g = load_config(args.config, P)
    rep = functionals.mabuchi(P, fan_of(P, warn=False), v, w, g, rtol=args.tol)
    out = rep.to_json()
    out["float"] = {k: float(getattr(rep, a)) for k, a in
                    (("H", "H_v"), ("R", "R_v"), ("E_vw", "E_vw"), ("M", "M_vw"))}
    return out


def cmd_futaki(args):
    P = load_polytope(args.polytope)
    v, w = load_weights(args.weights, P)
    xi = _xi(args, P)
    rep = functionals.mabuchi(P, fan_of(P, warn=False), v, w, PLConcave.linear(P, xi), rtol=args.tol)
    return {"xi": list(xi), "futaki": rep.M_vw, "error": rep.errors["M_vw"], "components": rep.to_json()}


def cmd_extremal(args):
    P = load_polytope(args.polytope)
    v, w = load_weights(args.weights, P)
    res = functionals.extremal_function(P, fan_of(P, warn=False), v, w)
    return res.to_json()


def cmd_jmeasure(args):
    P = load_polytope(args.polytope)
    mu = load_measure(args.measure)
    jr = stability.j_energy(P, mu, budget=args.budget)
    return {"J": jr.value, "t": list(jr.t), "valuations": [list(x) for x in jr.valuations],
            "exact": jr.exact, "residual": jr.residual}


def cmd_beta(args):
    P = load_polytope(args.polytope)
    mu = load_measure(args.measure)
    return stability.beta(P, fan_of(P, warn=False), mu).to_json()


def cmd_twist_inf(args):
    P = load_polytope(args.polytope)
    mu = load_measure(args.measure)
    val, xi = stability.twist_infimum(P, mu)
    return {"value": val, "xi": list(xi)}


def cmd_solve_ma(args):
    P = load_polytope(args.polytope)
    v, _ = load_weights(args.weights, P)
    mu = load_measure(args.measure)
    sol = measures.solve_ma(P, fan_of(P, warn=False), v, mu, budget=args.budget, full=True)
    return {"potential": sol.potential.to_json(), "residual": sol.residual,
            "iterations": sol.iterations, "exact": sol.exact}


def cmd_envelope(args):
    P = load_polytope(args.polytope)
    if args.config is None:
        raise InputError("--config is required")
    data = _load_json(args.config, "config")
    f = PLConvex.from_json(P, data)
    env = potentials.concave_envelope(f)
    return {"envelope": env.envelope.to_json(), "contact_points": [list(p) for p in env.contact_points],
            "contact_cells": env.contact_cells}


def cmd_verdict(args):
    P = load_polytope(args.polytope)
    v, w = load_weights(args.weights, P)
    suite = load_suite(args.suite, P)
    rep = stability.verdict(P, fan_of(P, warn=False), v, w, suite)
    return rep.to_json()


def cmd_selftest(args):
    from .selftest import run_selftest
    results = run_selftest(seed=args.seed)
    ok = all(r["ok"] for r in results)
    return {"passed": ok, "checks": results}


HANDLERS = {name: globals()["cmd_" + name.replace("-", "_")] for name in COMMANDS}


# ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="toric-kstab",
                                     description="Non-Archimedean K-stability invariants of toric varieties.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--polytope", help="polytope JSON file or preset name (%s)" % ", ".join(sorted(PRESETS)))
        p.add_argument("--weights", help="weights JSON file or preset (%s)" % ", ".join(WEIGHT_PRESETS))
        p.add_argument("--config", help="PL function JSON file")
        p.add_argument("--xi", nargs="+", help="valuation covector, e.g. --xi 1 0")
        p.add_argument("--measure", help="atomic measure JSON file")
        p.add_argument("--suite", help="stability suite JSON file")
        p.add_argument("--proj", help="projection matrix for dh-push, JSON rows")
        p.add_argument("--tol", type=float, default=1e-9, help="quadrature tolerance (1e-15 .. 1e-3)")
        p.add_argument("--budget", type=int, default=200, help="optimizer iteration budget (1 .. 100000)")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _flatten(prefix, x, rows):
    if isinstance(x, dict):
        for k in sorted(x):
            _flatten(f"{prefix}.{k}" if prefix else str(k), x[k], rows)
    elif isinstance(x, list):
        for i, v in enumerate(x):
            _flatten(f"{prefix}[{i}]", v, rows)
    else:
        rows.append((prefix, x))


def render(report: dict, fmt: str) -> str:
    report = _jsonable(report)
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    rows: list = []
    _flatten("", report, rows)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["key", "value"])
    writer.writerows(rows)
    return buf.getvalue()


def _threads() -> int | None:
    raw = os.environ.get("TORIC_KSTAB_THREADS")
    if raw is None:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise InputError(f"TORIC_KSTAB_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise InputError("TORIC_KSTAB_THREADS must be at least 1")
    return n


NUMERICAL_ERRORS = (ArithmeticError, np.linalg.LinAlgError, CombinatorialCollapse)


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    err = sys.stderr
    try:
        if not 1e-15 <= args.tol <= 1e-3:
            raise InputError("--tol must lie in [1e-15, 1e-3]")
        if not 1 <= args.budget <= 100000:
            raise InputError("--budget must lie in [1, 100000]")
        threads = _threads()
        result = HANDLERS[args.command](args)
    except NUMERICAL_ERRORS as exc:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        for attr in ("residual", "danskin", "finite_difference", "kernel", "value", "error"):
            if hasattr(exc, attr) and attr != "error":
                payload[attr] = _jsonable(getattr(exc, attr))
        print(json.dumps(_jsonable(payload), sort_keys=True), file=err)
        return 3
    except (InputError, GeometryError, ValueError, KeyError, TypeError) as exc:
        print(f"input error: {exc}", file=err)
        return 2
    report = {"command": args.command, "conventions_sha256": conventions_hash(),
              "result": result, "threads": threads,
              "settings": {"tol": args.tol, "budget": args.budget, "seed": args.seed}}
    text = render(report, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.command == "selftest" and not result["passed"]:
        return 3
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
