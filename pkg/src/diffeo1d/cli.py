"""Command-line front end: ``diffeo1d <subcommand> [options]``.

Exit status: 0 when every requested check holds, 1 when a check fails (the
report is still written), 2 on malformed input or I/O errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from ._base import DiffeoError
from .reports import Report, atomic_write, table_csv, write_json, write_report, write_svg

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


class InputError(Exception):
    pass


@dataclass
class RunConfig:
    subcommand: str
    grid: int = 1024
    tol: float = 1e-9
    out: str | None = None
    format: str = "json"
    svg: str | None = None
    seed: int = 0
    options: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if not (self.tol > 0 and math.isfinite(self.tol)):
            raise InputError("--tol must be positive")
        g = self.grid
        if g < 256 or g & (g - 1):
            raise InputError("--grid must be a power of two >= 256")
        if self.format not in ("json", "csv"):
            raise InputError("--format must be json or csv")
        return self

    def echo(self) -> dict:
        d = {"subcommand": self.subcommand, "grid": self.grid, "tol": self.tol,
             "format": self.format, "seed": self.seed}
        d.update({k: v for k, v in sorted(self.options.items())
                  if k not in ("func", "command") and v is not None})
        return d


# -- input helpers ------------------------------------------------------------------

def _load_map(path):
    from .mapspec import load_map
    if path is None:
        raise InputError("--map is required")
    try:
        return load_map(path)
    except DiffeoError as exc:
        raise InputError(str(exc)) from exc


def _load_action(path):
    from .mapspec import load_action
    from .paths import ActionTuple
    if path is None:
        raise InputError("--action is required")
    try:
        domain, maps = load_action(path)
        act = ActionTuple(tuple(maps), domain)
        act.validate()
    except DiffeoError as exc:
        raise InputError(str(exc)) from exc
    return act


def _grid(cfg: RunConfig):
    from .grid import standard_grid
    return standard_grid(cfg.grid)


def _schedule(text):
    if text is None:
        return None
    try:
        vals = [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise InputError(f"bad schedule {text!r}") from exc
    if not vals or any(v < 1 for v in vals):
        raise InputError("schedule entries must be positive integers")
    return vals


def _emit(cfg: RunConfig, report: Report) -> None:
    report.finish()
    if cfg.out:
        write_report(cfg.out, report, cfg.format)
    else:
        data = report.as_dict()
        if cfg.format == "json":
            sys.stdout.write(json.dumps(data, indent=2) + "\n")
        else:
            from .reports import report_csv
            sys.stdout.write(report_csv(data))


# -- subcommands ------------------------------------------------------------------

def cmd_gallery(cfg: RunConfig, ns) -> Report:
    from .gallery import gallery, names, records
    rep = Report("gallery", cfg.echo())
    if ns.list or not ns.name:
        rep.results["fixtures"] = names()
        return rep
    try:
        fx = gallery(ns.name)
    except KeyError as exc:
        raise InputError(str(exc.args[0])) from exc
    recs = records()
    rep.results["record"] = recs.get(ns.name)
    if isinstance(fx, tuple):
        spec = {"domain": getattr(fx[0], "domain", "interval"),
                "generators": [g.to_spec() for g in fx]}
    else:
        spec = fx.to_spec()
    rep.results["spec"] = spec
    if ns.emit:
        write_json(ns.emit, spec)
    return rep


def cmd_distortion(cfg: RunConfig, ns) -> Report:
    from .distortion import DEFAULT_SCHEDULE, asymptotic_distortion, pl_exact_distortion
    f = _load_map(ns.map)
    rep = Report("distortion", cfg.echo())
    sched = _schedule(ns.schedule) or DEFAULT_SCHEDULE
    if ns.exact_pl:
        from .pl import PLMap
        if not isinstance(f, PLMap):
            raise InputError("--exact-pl needs a PL map")
        value, k, a = pl_exact_distortion(f, full=True)
        rep.results.update({"dist": value, "k": k, "a": str(a), "method": "pl-exact"})
        rep.add("bracket", value, value, "==", cfg.tol, "asymptotic distortion bracket")
        return rep
    est = asymptotic_distortion(f, sched, grid=_grid(cfg))
    rep.results.update(est.as_dict())
    rep.add("bracket", est.lower, est.upper, "<=", max(cfg.tol, est.error),
            "lower endpoint bound <= subadditive upper bound")
    for (n, v, err), (m, w, err2) in zip(est.sequence, est.sequence[1:]):
        if m % n == 0:
            rep.add(f"subadditive[{n}->{m}]", w, v, "<=", max(cfg.tol, err + err2),
                    "subadditivity of var(log Df^n)")
    if cfg.svg:
        seq = np.array([[s[0], s[1]] for s in est.sequence], dtype=float)
        write_svg(cfg.svg, {"var(log Df^n)/n": (np.log2(seq[:, 0]), seq[:, 1]),
                            "lower bound": (np.log2(seq[:, 0]), np.full(len(seq), est.lower))},
                  title="asymptotic distortion", xlabel="log2 n", ylabel="var / n")
    return rep


def cmd_drift(cfg: RunConfig, ns) -> Report:
    from .distortion import CocycleInstance, cocycle_drift
    act = _load_action(ns.maps)
    rep = Report("drift", cfg.echo())
    try:
        inst = CocycleInstance(act.generators, tol=max(cfg.tol, 1e-9), grid=_grid(cfg))
        res = cocycle_drift(inst, ns.word, n=ns.box)
    except (DiffeoError, ValueError) as exc:
        raise InputError(str(exc)) from exc
    rep.results.update(res)
    rep.add("converse", res["defect"], res["converse_bound"], ">=", 1e-9,
            "coboundary defect lower bound")
    return rep


def cmd_szekeres(cfg: RunConfig, ns) -> Report:
    from .szekeres import l1_bound, szekeres_field, variation_bound
    f = _load_map(ns.map)
    rep = Report("szekeres", cfg.echo())
    vf = szekeres_field(f, side=ns.side, tol=cfg.tol)
    diag = dict(vf.diagnostics)
    res = vf.invariance_residual()
    diag["invariance_residual"] = res
    rep.results["diagnostics"] = diag
    rep.add("invariance", res, 1e-6, "<", 0.0, "field invariance X o f = Df X")
    for c in (0.05, 0.1, 0.2):
        try:
            vb, lb = variation_bound(vf, c), l1_bound(vf, c)
        except DiffeoError:
            continue
        rep.add(f"variation_bound[c={c}]", vb["lhs"], vb["rhs"], "<=", 1e-6,
                "var(log X) against var(log Df) near the end")
        rep.add(f"l1_bound[c={c}]", lb["lhs"], lb["rhs"], "<=", 1e-6,
                "L1 distance of D log X against the affine derivative")
    x = np.linspace(0.0, 1.0, cfg.grid + 1)[1:-1]
    X = vf(x)
    if cfg.out and cfg.format == "csv":
        # (x, X) rows go to --out, the diagnostics block to a .json sidecar
        atomic_write(cfg.out, table_csv({"x": x, "X": X}))
        rep.results["table"] = cfg.out
        cfg.out, cfg.format = str(Path(cfg.out).with_suffix(".json")), "json"
    else:
        rep.results["table"] = {"x": x, "X": X}
    if cfg.svg:
        write_svg(cfg.svg, {"X(x)": (x, X)}, title="generating field", xlabel="x",
                  ylabel="X")
    return rep


def cmd_mather(cfg: RunConfig, ns) -> Report:
    from .distortion import asymptotic_distortion
    from .mather import fundamental_check, mather_diffeo, mather_homomorphism
    from .pl import PLMap
    f = _load_map(ns.map)
    rep = Report("mather", cfg.echo())
    M = mather_diffeo(f, a=ns.a)
    dist = asymptotic_distortion(f)
    fc = fundamental_check(f, dist=dist.value, var_dm=M.var)
    fund = {"lhs": fc["lhs"], "rhs": fc["rhs"], "holds": fc["holds"]}
    if "equality_residual" in fc:
        fund["pl_equality_residual"] = fc["equality_residual"]
        fund["pl_lower_bound_holds"] = fc["lower_bound_holds"]
    try:
        phi = mather_homomorphism(f)
    except DiffeoError:
        phi = None
    rep.results.update({"a": M.a, "m": M.m, "n": M.n, "k": M.k, "var_log_DM": M.var,
                        "var_error": M.var_error, "trivial": M.trivial,
                        "fundamental": fund, "phi_M": phi, "dist": dist.value})
    rep.add("fundamental", fc["lhs"], fc["rhs"], "<=", 1e-4 + dist.error + M.var_error,
            "|var(log DM) - dist| <= |log Df(0)| + |log Df(1)|")
    if isinstance(f, PLMap):
        rep.add("pl_equality", fc["equality_residual"], 1e-4, "<", 0.0,
                "var(log DM) = |log Df(0)| + |log Df(1)| + dist for PL maps")
    if ns.conjugacy_scan:
        rep.results["conjugacy_scan"] = _conjugacy_scan(f)
    if cfg.svg:
        write_svg(cfg.svg, {"log DM": (M.t, M.log_dm)}, title="Mather invariant",
                  xlabel="t", ylabel="log DM")
    return rep


SCAN_AMPLITUDES = (0.0, 0.1, 0.2, 0.4)


def _conjugacy_scan(f, delta: float = 1e-9) -> list:
    """AC mass of d(log Dg) for g = h f h^-1, with conjugators whose
    log-derivative is s sgn(sin 2 pi x) |sin 2 pi x|^(1/2), only Hoelder-1/2
    at its zeros.  The mass is measured on g itself as the change of log Dg
    between the ends minus the jumps at its singular points, so it does not
    reuse the decomposition into h and f.  Reported as data; no check."""
    from .analytic import Composition
    from .core import SINGULAR_OFFSET
    from .grid import build_from_log_derivative
    rows = []
    for s in SCAN_AMPLITUDES:
        def logd(x, s=s):
            w = np.sin(2 * np.pi * x)
            return s * np.sign(w) * np.sqrt(np.abs(w))
        h = build_from_log_derivative(logd)
        g = Composition([h, f, h.inverse()])
        ends = g._log_deriv(np.array([delta, 1.0 - delta]))
        sp = np.asarray(g.singular_points(), dtype=float)
        jumps = float(np.sum(g._log_deriv(sp + SINGULAR_OFFSET)
                             - g._log_deriv(sp - SINGULAR_OFFSET))) if sp.size else 0.0
        rows.append({"amplitude": s, "ac_mass": float(ends[1] - ends[0]) - jumps})
    return rows


def _path_json(path, grid) -> dict:
    from .paths import flatten, path_report
    rep = path_report(path)
    samples = []
    for t, acts in zip(path.times, path.actions):
        specs = []
        for g in acts:
            if getattr(g, "domain", "interval") == "interval":
                try:
                    g = flatten(g, grid)
                except DiffeoError:
                    pass
            specs.append(g.to_spec())
        samples.append({"t": float(t), "generators": specs})
    return {"report": rep, "samples": samples}


def cmd_deform(cfg: RunConfig, ns) -> Report:
    from .paths import deform, path_report
    act = _load_action(ns.action)
    rep = Report("deform", cfg.echo())
    path = deform(act, ns.method, samples=ns.samples, factor=ns.factor, alpha=ns.alpha)
    pr = path_report(path)
    rep.extend({**c, "anchor": f"path {c['name']}"} for c in pr["checks"])
    rep.results["path_report"] = {k: v for k, v in pr.items() if k != "checks"}
    rep.results["details"] = path.details
    if ns.path_out:
        write_json(ns.path_out, _path_json(path, _grid(cfg)))
    if cfg.svg:
        series = {f"var(log Df_{i + 1})": (path.times, path.var[:, i])
                  for i in range(path.var.shape[1])}
        series.update({f"budget {i + 1}": (path.times, np.full(path.times.size, path.budget[i]))
                       for i in range(path.var.shape[1])})
        write_svg(cfg.svg, series, title=f"{ns.method} path", xlabel="t", ylabel="var(log D)")
    return rep


def cmd_sternberg(cfg: RunConfig, ns) -> Report:
    from .gallery import _phi, sternberg_eval, sternberg_ratio
    rep = Report("sternberg", cfg.echo())
    if not ns.lam < 0:
        raise InputError("--lambda must be negative")
    rows = [sternberg_ratio(ns.lam, ns.x, k) for k in range(ns.k + 1)]
    r = np.array([row["ratio"] for row in rows])
    tele = max(abs(row["ratio"] - row["telescoped"]) for row in rows)
    y = sternberg_eval(ns.lam, np.array([ns.x]))
    resid = abs(float(_phi(y)[0]) - math.exp(ns.lam) * float(_phi(np.array([ns.x]))[0]))
    rep.results.update({"lambda": ns.lam, "x": ns.x, "rows": rows,
                        "min_ratio": float(r.min()),
                        "lipschitz_lower_bound": float(1 / math.sqrt(r.min()))})
    rep.add("telescoping", tele, 1e-10, "<", 0.0, "ratio equals its telescoped form")
    rep.add("decreasing", float(np.max(np.diff(r))), 0.0, "<", 0.0, "ratios strictly decrease")
    rep.add("threshold", float(r.min()), ns.threshold, "<", 0.0,
            "ratio drops below the threshold")
    rep.add("conjugacy", resid, 1e-13, "<", 0.0, "Phi(f(x)) = e^lambda Phi(x)")
    if ns.holder_scan:
        rep.results["holder_scan"] = _holder_scan(ns.lam)
    if cfg.svg:
        write_svg(cfg.svg, {"r_k": (np.arange(r.size), r)}, title="Sternberg ratios",
                  xlabel="k", ylabel="r_k")
    return rep


HOLDER_EXPONENTS = (0.05, 0.1, 0.25, 0.5)


def _holder_scan(lam: float) -> dict:
    """|Df(x) - Df(0)| / x^a along x -> 0, per exponent a.  Growth toward 0
    suggests the derivative is not a-Hoelder there; a finite scan cannot
    decide, so nothing is checked."""
    from .gallery import SternbergMap
    f = SternbergMap(lam)
    x = np.geomspace(1e-200, 1e-2, 41)
    d = np.exp(f._log_deriv(x))
    gap = np.abs(d - math.exp(lam))
    return {"x": x, "quotients": {str(a): gap / x**a for a in HOLDER_EXPONENTS}}


SUITES = ("fundamental", "random-pl", "szekeres", "averaging", "homomorphism")


def cmd_verify(cfg: RunConfig, ns) -> Report:
    rep = Report("verify", cfg.echo())
    suite = ns.suite
    if suite == "random-pl":
        from .distortion import pl_exact_distortion
        from .gallery import random_pl
        from .mather import fundamental_check
        rng = np.random.default_rng(cfg.seed)
        for i in range(ns.count):
            f = random_pl(rng, int(rng.integers(4, 7)))
            fc = fundamental_check(f, dist=pl_exact_distortion(f))
            rep.add(f"pl_equality[{i}]", fc["equality_residual"], 1e-4, "<", 0.0,
                    "PL fundamental equality")
        return rep
    f = _load_map(ns.map)
    if suite == "fundamental":
        from .distortion import asymptotic_distortion
        from .mather import fundamental_check, mather_diffeo
        from .pl import PLMap
        dist = asymptotic_distortion(f)
        M = mather_diffeo(f)
        fc = fundamental_check(f, dist=dist.value, var_dm=M.var)
        rep.results.update(fc)
        rep.add("fundamental", fc["lhs"], fc["rhs"], "<=", 1e-4 + dist.error + M.var_error,
                "fundamental inequality")
        if isinstance(f, PLMap):
            rep.add("pl_equality", fc["equality_residual"], 1e-4, "<", 0.0,
                    "PL fundamental equality")
    elif suite == "szekeres":
        from .szekeres import szekeres_field
        vf = szekeres_field(f, tol=cfg.tol)
        one = vf.flow_map(1.0)
        x = np.linspace(0.0, 1.0, 1025)[1:-1]
        err = float(np.max(np.abs(one._eval(x) - f._eval(x))))
        rep.results["diagnostics"] = vf.diagnostics
        rep.add("time_one", err, 1e-7, "<", 0.0, "time-one map of the field")
        rep.add("invariance", vf.invariance_residual(), 1e-6, "<", 0.0, "field invariance")
    elif suite == "averaging":
        from .core import var_log_D, iterate
        from .paths import box_average_conjugator
        prev = math.inf
        for n in (2, 4, 8, 16, 32):
            g, conj = box_average_conjugator((f,), n)
            lhs = var_log_D(conj[0])
            rhs = var_log_D(iterate(f, n)) / n
            rep.add(f"averaging[n={n}]", lhs, rhs, "<=", 1e-6, "averaging bound")
            rep.add(f"monotone[n={n}]", rhs, prev, "<=", 1e-9, "bounds do not increase")
            prev = rhs
    elif suite == "homomorphism":
        from .mather import ac_mass_quadrature, mather_homomorphism
        phi = mather_homomorphism(f)
        quad = ac_mass_quadrature(f)
        rep.results.update({"phi_M": phi, "quadrature": quad})
        rep.add("homomorphism", abs(phi - quad), 1e-6, "<", 0.0,
                "phi_M against quadrature of the affine derivative")
    return rep


COMMANDS = {
    "gallery": cmd_gallery, "distortion": cmd_distortion, "drift": cmd_drift,
    "szekeres": cmd_szekeres, "mather": cmd_mather, "deform": cmd_deform,
    "sternberg": cmd_sternberg, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--grid", type=int, default=1024,
                        help="uniform cells of the sampling grid (power of two >= 256)")
    common.add_argument("--tol", type=float, default=1e-9, help="numerical tolerance")
    common.add_argument("--out", help="report path (stdout when omitted)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--svg", help="also write an SVG plot here")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    common.add_argument("--regen-oracles", action="store_true",
                        help="recompute the committed gallery records first")

    p = argparse.ArgumentParser(prog="diffeo1d", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--regen-oracles", action="store_true", dest="regen_top",
                   help="recompute the committed gallery records and exit")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("gallery", parents=[common], help="list or emit fixtures")
    s.add_argument("--list", action="store_true")
    s.add_argument("--name")
    s.add_argument("--emit", help="write the fixture's map spec here")

    s = sub.add_parser("distortion", parents=[common], help="asymptotic distortion")
    s.add_argument("--map")
    s.add_argument("--exact-pl", action="store_true")
    s.add_argument("--schedule", help="comma-separated powers, e.g. 1,2,4,8")

    s = sub.add_parser("drift", parents=[common], help="cocycle drift and coboundary defect")
    s.add_argument("--maps", help="action spec with commuting generators")
    s.add_argument("--word", default="g1", help="group element, e.g. 'g1^3 g2^-1'")
    s.add_argument("--box", type=int, default=32)

    s = sub.add_parser("szekeres", parents=[common], help="generating vector field")
    s.add_argument("--map")
    s.add_argument("--side", choices=("left", "right"), default="left")

    s = sub.add_parser("mather", parents=[common], help="Mather invariant")
    s.add_argument("--map")
    s.add_argument("--a", type=float, default=0.5, help="base point")
    s.add_argument("--conjugacy-scan", action="store_true",
                   help="experiment: phi_M under a family of low-regularity conjugators")

    s = sub.add_parser("deform", parents=[common], help="deformation paths")
    s.add_argument("--action")
    s.add_argument("--method", default="homotopy",
                   choices=("circle-average", "box-average", "homotopy", "alpha", "scheme34"))
    s.add_argument("--samples", type=int, default=33)
    s.add_argument("--factor", type=float, default=2.0, help="budget factor (> 1)")
    s.add_argument("--alpha", type=float, default=0.25)
    s.add_argument("--path-out", help="write per-t map tables and the path report here")

    s = sub.add_parser("sternberg", parents=[common], help="non-linearizability certificate")
    s.add_argument("--lambda", dest="lam", type=float, default=-1.0)
    s.add_argument("--x", type=float, default=0.1)
    s.add_argument("--k", type=int, default=20)
    s.add_argument("--threshold", type=float, default=0.05)
    s.add_argument("--holder-scan", action="store_true",
                   help="experiment: Hoelder quotients of Df near the fixed point")

    s = sub.add_parser("verify", parents=[common], help="run a check suite")
    s.add_argument("--suite", choices=SUITES, default="fundamental")
    s.add_argument("--map")
    s.add_argument("--count", type=int, default=10)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    if ns.command is None:
        if ns.regen_top:
            from .oracles import regenerate
            print(regenerate())
            return EXIT_OK
        parser.print_help(sys.stderr)
        return EXIT_INPUT
    opts = {k: v for k, v in vars(ns).items()
            if k not in ("grid", "tol", "out", "format", "svg", "seed", "regen_oracles",
                         "regen_top", "command")}
    cfg = RunConfig(ns.command, ns.grid, ns.tol, ns.out, ns.format, ns.svg, ns.seed, opts)
    try:
        cfg.validate()
        if ns.regen_oracles:
            from .oracles import regenerate
            regenerate()
        report = COMMANDS[ns.command](cfg, ns)
        _emit(cfg, report)
    except InputError as exc:
        print(f"diffeo1d: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DiffeoError as exc:
        print(f"diffeo1d: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except OSError as exc:
        print(f"diffeo1d: I/O error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK if report.holds else EXIT_FAIL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
