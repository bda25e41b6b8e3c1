"""Batch driver.

Every subcommand writes one JSON report (stdout or ``--output``) holding the
resolved configuration, and optionally a CSV grid (``--csv``). Exit status
is 0 on success, 2 for divergent or inconclusive results and 1 for invalid
input.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bloch.counterexample import area_function_truncated, build_counterexample, counterexample_report
from .bloch.functions import AnalyticFunction, parse_function
from .bloch.seminorm import GridSpec, bloch_seminorm, little_bloch_profile
from .carleson import Arc, BoxQuadrature, CarlesonSquare
from .extension import build_net, decompose, s_norm_upper, theorem1_sandwich
from .geometry import MetricConvention
from .operators import (
    BergmanProjection,
    antiderivative_product,
    cesaro_matrix,
    project,
    residual_halves,
    residual_trace,
    spectral_radius_b2,
    spectral_radius_eps,
    truncation_spectral_radius,
)
from .reports import make_report, merge_reports, write_csv, write_report
from .weights.b2 import b1star_ratio, b2_characteristic, b2_predicate, conformal_sweep, gamma, vanishing_b2_profile
from .weights.families import parse_weight
from .weights.oscillation import (
    bmo_disc_norm,
    epsilon_stability,
    jn_check,
    jn_lambda_grid,
    jn_profile,
    oscillation_constant,
)
from .weights.sarason import sarason_search

JOBS_ENV = "BLOCHB2_JOBS"
RESERVED = {"command", "config", "output", "csv", "handler"}


class ConfigError(Exception):
    def __init__(self, key: str, message: str):
        super().__init__(message)
        self.key = key
        self.message = message


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse names the offending option as "argument --name/-n: ..."
        m = re.match(r"argument ([^:/ ]+)", message)
        raise ConfigError(m.group(1).lstrip("-") if m else "argv", message)


def _parse(key: str, fn, text):
    try:
        return fn(text)
    except ConfigError:
        raise
    except (ValueError, TypeError, OSError) as exc:
        raise ConfigError(key, str(exc)) from None


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _complexes(text) -> list[complex]:
    if isinstance(text, (list, tuple)):
        return [complex(x) for x in text]
    return [complex(x.replace(" ", "")) for x in str(text).split(",") if x.strip()]


def _squares(text) -> list[CarlesonSquare]:
    """``center:length;center:length`` in radians of center and normalized length."""
    out = []
    for part in str(text).split(";"):
        if part.strip():
            c, _, m = part.partition(":")
            out.append(CarlesonSquare(Arc(float(c), float(m))))
    return out


def _integrand(text: str):
    if text == "abs2":
        return lambda z: np.abs(z) ** 2
    if text == "conj":
        return np.conj
    return parse_function(text)


def _weight(a, key="weight"):
    return _parse(key, parse_weight, getattr(a, key))


def _function(a, key="function") -> AnalyticFunction:
    return _parse(key, parse_function, getattr(a, key))


def _quad(a) -> BoxQuadrature:
    return _parse("quadrature", lambda _: BoxQuadrature(a.radial_levels, a.angular_nodes, a.radial_nodes), None)


def _pmap(fn, items, jobs: int) -> list:
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# handlers return (result, status, csv) with csv = (header, rows) or None


def cmd_b2_char(a):
    rep = b2_characteristic(_weight(a), max_level=a.max_level, quad=_quad(a))
    status = "divergent" if rep.divergent else ("ok" if b2_predicate(rep) else "inconclusive")
    rows = [(k, v) for k, v in enumerate(rep.per_level)]
    return rep.to_dict() | {"predicate": b2_predicate(rep)}, status, (["level", "sup_product"], rows)


def cmd_gamma(a):
    rep = gamma(_weight(a), tol=a.tol, max_level=a.max_level, quad=_quad(a))
    status = "ok" if rep.status == "ok" else "inconclusive"
    return rep.to_dict(), status, (["t", "passes"], [(t, float(ok)) for t, ok in rep.trace])


def cmd_osc_const(a):
    c = oscillation_constant(_weight(a), a.pair_budget, a.seed, a.metric)
    return {"constant": c}, "ok", None


def cmd_jn_profile(a):
    w = _weight(a)
    rep = b2_characteristic(w, max_level=a.max_level)
    squares = _parse("squares", _squares, a.squares)
    result = {"characteristic_sq": rep.characteristic_sq, "squares": []}
    if rep.divergent or not math.isfinite(rep.characteristic_sq):
        return result | {"reason": "weight is not B2 on the scan"}, "divergent", None
    lam = _parse("lambdas", _floats, a.lambdas) if a.lambdas else jn_lambda_grid(rep.characteristic_sq)
    profiles = _pmap(lambda Q: jn_profile(w, Q, lam, a.samples, a.seed), squares, a.jobs)
    rows = []
    for Q, prof in zip(squares, profiles):
        ok = jn_check(prof, rep.characteristic_sq)
        result["squares"].append(prof.to_dict() | {"within_bound": ok})
        rows += [(Q.m, l, t) for l, t in zip(prof.lambda_grid, prof.tail_fraction)]
    status = "ok" if all(all(s["within_bound"]) for s in result["squares"]) else "inconclusive"
    return result, status, (["square_length", "lambda", "tail"], rows)


def _value_source(a):
    if a.function:
        return _function(a)
    return _weight(a)


def cmd_bmo_norm(a):
    return {"bmo_norm": bmo_disc_norm(_value_source(a), a.discs, a.samples, a.seed)}, "ok", None


def cmd_eps_cond(a):
    f = _value_source(a)
    eps = _parse("eps", _floats, a.eps)
    out = [epsilon_stability(f, e, a.pair_budget, a.seed, a.metric) for e in eps]
    rows = [(s.eps, s.constants[0], s.constants[1], float(s.stable)) for s in out]
    return {"stability": [s.to_dict() for s in out]}, "ok", (["eps", "C", "C_doubled", "stable"], rows)


def cmd_sarason(a):
    bad, res = sarason_search(a.spaces, a.seed)
    ratio = max((r.variance / (4.0 * r.epsilon) for r in res if r.epsilon > 0), default=0.0)
    rows = [(r.epsilon, r.variance) for r in res]
    return {"violations": bad, "spaces": a.spaces, "max_ratio": ratio}, "ok" if bad == 0 else "inconclusive", (["eps", "variance"], rows)


def cmd_b1star(a):
    pts = _parse("points", _complexes, a.points)
    ratio, per, div = b1star_ratio(_weight(a), pts)
    rows = [(z.real, z.imag, v) for z, v in zip(pts, per)]
    return {"ratio": ratio, "per_point": per, "divergent": div}, "divergent" if div else "ok", (["re", "im", "ratio"], rows)


def cmd_conf_sweep(a):
    w = _weight(a)
    pts = _parse("points", _complexes, a.points)
    reps = _pmap(lambda z: conformal_sweep(w, [z], a.max_level, _quad(a))[0], pts, a.jobs)
    rows = [(z.real, z.imag, r.characteristic_sq) for z, r in zip(pts, reps)]
    div = any(r.divergent for r in reps)
    return {"points": pts, "reports": [r.to_dict() for r in reps]}, "divergent" if div else "ok", (["re", "im", "characteristic_sq"], rows)


def cmd_vanishing_profile(a):
    deltas = _parse("deltas", _floats, a.deltas)
    prof = _parse("deltas", lambda d: vanishing_b2_profile(_weight(a), d, a.max_level, _quad(a)), deltas)
    return {"profile": prof}, "ok", (["delta", "sup_product"], prof)


def cmd_bloch_norm(a):
    g = _function(a)
    grid = _parse("levels", lambda L: GridSpec(levels=L), a.levels)
    result = {"seminorm": bloch_seminorm(g, grid), "grid": grid.to_dict()}
    rows = None
    if a.radii:
        prof = little_bloch_profile(g, _parse("radii", _floats, a.radii))
        result["profile"] = prof
        rows = (["r", "sup"], prof)
    return result, "ok", rows


def cmd_counterexample(a):
    M = _parse("M", _floats, a.M)
    rep = _parse("spec", lambda s: counterexample_report(s, a.terms, samples=a.samples, M_values=M, seed=a.seed), a.spec)
    g = build_counterexample(a.spec, a.terms)
    eps = _parse("eps", _floats, a.eps)
    stab = [epsilon_stability(g, e, a.pair_budget, a.seed) for e in eps]
    result = rep.to_dict() | {"eps_stability": [s.to_dict() for s in stab]}
    return result, "ok", (["delta", "area_function"], rep.area_function)


def cmd_area_function(a):
    g = _function(a)
    deltas = _parse("deltas", _floats, a.deltas)
    xi = _parse("xi", complex, a.xi)
    vals = [(d, _parse("deltas", lambda x: area_function_truncated(g, a.eps, xi, x), d)) for d in deltas]
    return {"values": vals, "eps": a.eps, "xi": xi}, "ok", (["delta", "area_function"], vals)


def cmd_net(a):
    net = _parse("separation", lambda s: build_net(s, a.r_max, a.seed), a.separation)
    rows = [(z.real, z.imag) for z in net.points]
    return net.to_dict(), "ok", (["re", "im"], rows)


def cmd_decompose(a):
    f = _weight(a)
    cert = gamma(f, tol=a.tol, max_level=a.max_level) if a.certify else None
    dec = _parse("eps", lambda e: decompose(f, e, a.eta, cert, a.r_max, a.seed, a.pair_budget), a.eps)
    if a.save:
        dec.to_json(a.save)
    summary = {k: v for k, v in dec.summary().items() if k not in ("net", "values")}
    return summary | {"gamma": cert.to_dict() if cert else None}, "ok", None


def cmd_sandwich(a):
    res = theorem1_sandwich(_weight(a), a.tol, a.max_level, a.r_max, a.seed, a.pair_budget)
    return res.to_dict(), "ok" if res.sandwich_ok else "inconclusive", None


def cmd_s_norm(a):
    rel = _parse("rel_eps", _floats, a.rel_eps)
    best, table = s_norm_upper(_weight(a), rel, a.tol, a.max_level, a.r_max, a.seed, a.pair_budget)
    rows = [(r["eps"], r["u_sup"], r["v_lip"], r["total"]) for r in table]
    return {"s_norm_upper": best, "table": table}, "ok", (["eps", "u_sup", "v_lip", "total"], rows)


def cmd_project(a):
    f = _parse("integrand", _integrand, a.integrand)
    pts = _parse("points", _complexes, a.points)
    res = _parse("points", lambda p: project(f, p, BergmanProjection(a.level)), pts)
    rows = [(z.real, z.imag, v.real, v.imag) for z, v in zip(pts, res.values)]
    result = {"points": pts, "values": res.values, "tolerance": res.tolerance, "divergent": res.divergent, "level": res.level}
    return result, "divergent" if res.divergent else "ok", (["re", "im", "P_re", "P_im"], rows)


def cmd_confid_residual(a):
    f = _parse("integrand", _integrand, a.integrand)
    z = _parse("z", complex, a.z)
    levels = [int(x) for x in _parse("levels", _floats, a.levels)]
    trace = _parse("z", lambda zz: residual_trace(f, zz, None, levels), z)
    halves = residual_halves(trace)
    ok = halves and trace[-1][1] < a.threshold
    return {"z": z, "trace": trace, "halves": halves, "threshold": a.threshold}, "ok" if ok else "inconclusive", (["level", "residual"], trace)


def cmd_cesaro_matrix(a):
    g = _function(a)
    M = _parse("N", lambda n: cesaro_matrix(g, n), a.N)
    rng = np.random.default_rng(a.seed)
    c = np.zeros(a.N, dtype=complex)
    c[: a.N // 2] = rng.normal(size=a.N // 2) + 1j * rng.normal(size=a.N // 2)
    err = float(np.max(np.abs(M.apply_monomial(c) - antiderivative_product(c, g.deriv_coefficients(a.N), a.N))))
    strict = bool(np.all(np.triu(M.entries) == 0))
    k, n = np.nonzero(M.entries)
    vals = M.entries[k, n]
    rows = [(kk, nn, complex(v).real, complex(v).imag) for kk, nn, v in zip(k, n, vals)]
    result = {"N": a.N, "strictly_lower": strict, "check_error": err, "max_entry": float(np.max(np.abs(M.entries), initial=0.0)), "g": g.params()}
    return result, "ok", (["k", "n", "re", "im"], rows)


def cmd_spectrum(a):
    g = _function(a)
    if a.method == "b2":
        rep = _parse("p", lambda p: spectral_radius_b2(g, p, a.xi_count, a.tol, a.max_level), a.p)
        rows = [(t, float(ok)) for t, ok, _ in rep.trace]
        header = ["lambda", "passes"]
    elif a.method == "eps":
        grid = _parse("eps_grid", _floats, a.eps_grid)
        rep = spectral_radius_eps(g, a.pair_budget, grid, a.seed, a.metric)
        rows = [(d["eps"], d["constants"][0], d["constants"][1], float(d["stable"])) for d in rep.trace]
        header = ["eps", "C", "C_doubled", "stable"]
    else:
        M = _parse("N", lambda n: cesaro_matrix(g, n), a.N)
        rep = _parse("N", truncation_spectral_radius, M)
        rows = list(rep.trace)
        header = ["N", "radius"]
    status = "ok" if rep.status == "ok" else "inconclusive"
    return rep.to_dict(), status, (header, rows)


def cmd_report_merge(a):
    reports = []
    for p in a.inputs:
        try:
            reports.append(json.loads(Path(p).read_text()))
        except (OSError, ValueError) as exc:
            raise ConfigError("inputs", f"{p}: {exc}") from None
    merged = merge_reports(reports)
    return merged, merged["status"], None


def _common(p, quad=False, weight=None, function=None, seed=False, metric=False):
    if weight is not None:
        p.add_argument("--weight", default=weight, help="weight spec, e.g. radial:0.5, point:1, exp-harmonic:log,2")
    if function is not None:
        p.add_argument("--function", default=function, help="analytic function spec, e.g. log, z*0.5, factorial:10")
    if seed:
        p.add_argument("--seed", type=int, default=0)
    if metric:
        p.add_argument("--metric", default=MetricConvention.PAPER_SQUARED.value, choices=[m.value for m in MetricConvention])
    if quad:
        p.add_argument("--radial-levels", type=int, default=6)
        p.add_argument("--angular-nodes", type=int, default=4)
        p.add_argument("--radial-nodes", type=int, default=4)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="blochb2", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option values (keys are option names)")
    parser.add_argument("--output", help="report path (default: stdout)")
    parser.add_argument("--csv", help="CSV grid path")
    parser.add_argument("--jobs", type=int, default=int(os.environ.get(JOBS_ENV, "1")), help=f"worker threads (default ${JOBS_ENV} or 1)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, handler, **kw):
        p = sub.add_parser(name, **kw)
        p.set_defaults(handler=handler)
        return p

    p = add("b2-char", cmd_b2_char, help="dyadic B2 characteristic")
    _common(p, quad=True, weight="const")
    p.add_argument("--max-level", type=int, default=8)

    p = add("gamma", cmd_gamma, help="gamma(f) for f = log w")
    _common(p, quad=True, weight="radial-log:-1")
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-level", type=int, default=8)

    p = add("osc-const", cmd_osc_const, help="hyperbolic oscillation constant of log w")
    _common(p, weight="radial:1", seed=True, metric=True)
    p.add_argument("--pair-budget", type=int, default=10_000)

    p = add("jn-profile", cmd_jn_profile, help="John-Nirenberg tails against the B2 bound")
    _common(p, weight="point:1", seed=True)
    p.add_argument("--squares", default="0:0.5;0:0.25;0:0.125;0:0.0625;0:0.03125")
    p.add_argument("--lambdas", default=None)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--max-level", type=int, default=8)

    p = add("bmo-norm", cmd_bmo_norm, help="disc BMO norm")
    _common(p, weight="radial:1", function="", seed=True)
    p.add_argument("--discs", type=int, default=200)
    p.add_argument("--samples", type=int, default=400)

    p = add("eps-cond", cmd_eps_cond, help="epsilon-condition constants and their stability")
    _common(p, weight="radial:-1", function="", seed=True, metric=True)
    p.add_argument("--eps", default="0.5,1,2")
    p.add_argument("--pair-budget", type=int, default=10_000)

    p = add("sarason", cmd_sarason, help="random finite-space check of the small-oscillation lemma")
    _common(p, seed=True)
    p.add_argument("--spaces", type=int, default=1000)

    p = add("b1star", cmd_b1star, help="conformal integral ratio")
    _common(p, weight="radial:0.5")
    p.add_argument("--points", default="0,0.5,0.9,0.5j,-0.9")

    p = add("conf-sweep", cmd_conf_sweep, help="B2 characteristic of w o phi_z over points")
    _common(p, quad=True, weight="radial:0.5")
    p.add_argument("--points", default="0,0.5,0.9,0.5j,-0.9")
    p.add_argument("--max-level", type=int, default=6)

    p = add("vanishing-profile", cmd_vanishing_profile, help="sup of B2 products over small squares")
    _common(p, quad=True, weight="exp-harmonic:lacunary-little:12")
    p.add_argument("--deltas", default=",".join(str(2.0 ** -k) for k in range(1, 11)))
    p.add_argument("--max-level", type=int, default=10)

    p = add("bloch-norm", cmd_bloch_norm, help="grid Bloch seminorm")
    _common(p, function="log")
    p.add_argument("--levels", type=int, default=24)
    p.add_argument("--radii", default=None)

    p = add("counterexample", cmd_counterexample, help="lacunary counterexample diagnostics")
    _common(p, seed=True)
    p.add_argument("--spec", default="factorial")
    p.add_argument("--terms", type=int, default=10)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--M", default="3,5,8")
    p.add_argument("--eps", default="0.5,0.25,0.1")
    p.add_argument("--pair-budget", type=int, default=10_000)

    p = add("area-function", cmd_area_function, help="truncated area function over a Stolz angle")
    _common(p, function="factorial:10")
    p.add_argument("--eps", type=float, default=0.002)
    p.add_argument("--xi", default="1")
    p.add_argument("--deltas", default=",".join(str(1e-3 * 2.0 ** -k) for k in range(7)))

    p = add("net", cmd_net, help="separated hyperbolic net")
    _common(p, seed=True)
    p.add_argument("--separation", type=float, default=1.0)
    p.add_argument("--r-max", type=float, default=0.99)

    p = add("decompose", cmd_decompose, help="f = u + v with v hyperbolic Lipschitz")
    _common(p, weight="radial:-0.5", seed=True)
    p.add_argument("--eps", type=float, default=0.6)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-level", type=int, default=8)
    p.add_argument("--r-max", type=float, default=0.99)
    p.add_argument("--pair-budget", type=int, default=10_000)
    p.add_argument("--certify", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--save", default=None, help="write the decomposition JSON here")

    p = add("sandwich", cmd_sandwich, help="gamma against the distance bounds")
    _common(p, weight="radial:-0.5", seed=True)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-level", type=int, default=8)
    p.add_argument("--r-max", type=float, default=0.99)
    p.add_argument("--pair-budget", type=int, default=10_000)

    p = add("s-norm", cmd_s_norm, help="upper bound for the u + v norm")
    _common(p, weight="radial:-0.5", seed=True)
    p.add_argument("--rel-eps", default="0.01,0.05,0.1,0.25,0.5,1")
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-level", type=int, default=8)
    p.add_argument("--r-max", type=float, default=0.99)
    p.add_argument("--pair-budget", type=int, default=10_000)

    p = add("project", cmd_project, help="Bergman projection by quadrature")
    p.add_argument("--integrand", default="abs2", help="abs2, conj or an analytic function spec")
    p.add_argument("--points", default="0,0.3,0.5j,-0.8")
    p.add_argument("--level", type=int, default=3)

    p = add("confid-residual", cmd_confid_residual, help="conformal identity residual under refinement")
    p.add_argument("--integrand", default="abs2")
    p.add_argument("--z", default="0.5")
    p.add_argument("--levels", default="0,1,2,3")
    p.add_argument("--threshold", type=float, default=1e-5)

    p = add("cesaro-matrix", cmd_cesaro_matrix, help="matrix of T_g on the orthonormal monomials")
    _common(p, function="log", seed=True)
    p.add_argument("--N", type=int, default=32)

    p = add("spectrum", cmd_spectrum, help="spectral radius of T_g")
    p.add_argument("method", choices=["b2", "eps", "truncation"])
    _common(p, function="log", seed=True, metric=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--xi-count", type=int, default=64)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--max-level", type=int, default=8)
    p.add_argument("--N", type=int, default=16)
    p.add_argument("--pair-budget", type=int, default=10_000)
    p.add_argument("--eps-grid", default="0.125,0.25,0.5,0.75,1,1.5,2,2.5,3,4,6,8")

    p = add("report-merge", cmd_report_merge, help="merge JSON reports")
    p.add_argument("inputs", nargs="+")
    return parser


def _subparser(parser: argparse.ArgumentParser, name: str) -> argparse.ArgumentParser:
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def parse_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    """Parse ``argv``; a ``--config`` file supplies defaults that explicit flags override."""
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        cfg = json.loads(Path(args.config).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError("config", str(exc)) from None
    if not isinstance(cfg, dict):
        raise ConfigError("config", "config must be a JSON object")
    sp = _subparser(parser, args.command)
    known = {a.dest for a in sp._actions} | {"jobs"}
    defaults = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest in RESERVED or dest not in known:
            raise ConfigError(key, f"unknown option for {args.command}")
        defaults[dest] = value
    if "jobs" in defaults:
        parser.set_defaults(jobs=defaults.pop("jobs"))
    sp.set_defaults(**defaults)
    return parser.parse_args(argv)


def resolved_config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in RESERVED}


def run(argv=None, timestamp: str | None = None) -> int:
    parser = build_parser()
    try:
        args = parse_config(parser, argv)
        if args.jobs < 1:
            raise ConfigError("jobs", "jobs must be at least 1")
        result, status, grid = args.handler(args)
    except ConfigError as exc:
        sys.stderr.write(json.dumps({"error": {"key": exc.key, "message": exc.message}}) + "\n")
        return 1
    report = make_report(args.command, resolved_config(args), result, status, timestamp)
    text = write_report(report, args.output)
    if args.output is None:
        sys.stdout.write(text)
    if args.csv and grid is not None:
        write_csv(args.csv, *grid)
    return 0 if status == "ok" else 2


def main(argv=None) -> int:
    return run(argv)


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
