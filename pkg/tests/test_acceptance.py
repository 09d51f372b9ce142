"""The twelve acceptance criteria, each with its runtime limit.

Every test prints (and records for the terminal summary) one line
``ACCEPTANCE <k>: PASS|FAIL ...``.
"""

import math
import time
from fractions import Fraction

import importlib

import numpy as np

from conftest import ACCEPTANCE
from diffeo1d.analytic import Composition, FlowMap, MobiusFlow
from diffeo1d.circle import CircleLift
from diffeo1d.core import iterate, var_log_D
from diffeo1d.distortion import (CocycleInstance, asymptotic_distortion, cocycle_drift,
                                 pl_exact_distortion)
from diffeo1d.mather import (ac_mass_quadrature, fundamental_check, mather_diffeo,
                             mather_homomorphism)
from diffeo1d.paths import (alpha_conjugate, box_average_conjugator, circle_average,
                            deform, homotopy_power_bounds, linear_log_homotopy,
                            path_report, rotation_gap, staged_alpha_scheme)
from diffeo1d.pl import PLMap
from diffeo1d.szekeres import l1_bound, szekeres_field, variation_bound

G = importlib.import_module("diffeo1d.gallery")
LOG2 = math.log(2.0)


def _record(k: int, ok: bool, seconds: float, limit: float, detail: str) -> None:
    status = "PASS" if ok else "FAIL"
    line = f"ACCEPTANCE {k:2d}: {status}  ({seconds:.2f} s / {limit:g} s)  {detail}"
    ACCEPTANCE[k] = line
    print(line)


class Criterion:
    def __init__(self, k: int, limit: float):
        self.k, self.limit = k, limit
        self.failures: list[str] = []
        self.notes: list[str] = []

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def check(self, ok, what: str):
        if not ok:
            self.failures.append(what)
        return ok

    def note(self, text: str):
        self.notes.append(text)

    def __exit__(self, exc_type, exc, tb):
        dt = time.perf_counter() - self.t0
        if exc_type is not None:
            self.failures.append(f"error: {exc!r}")
        if dt > self.limit:
            self.failures.append(f"runtime {dt:.2f} s over {self.limit} s")
        ok = not self.failures
        detail = "; ".join(self.failures) if self.failures else "; ".join(self.notes)
        _record(self.k, ok, dt, self.limit, detail)
        if exc_type is None:
            assert ok, detail
        return False


def test_01_pl_fundamental_equality():
    with Criterion(1, 10.0) as c:
        rng = np.random.default_rng(20240601)
        maps = [G.plx()] + [G.random_pl(rng, int(rng.integers(4, 7))) for _ in range(10)]
        worst = 0.0
        for f in maps:
            dist = pl_exact_distortion(f)
            M = mather_diffeo(f)
            fc = fundamental_check(f, dist=dist, var_dm=M.var)
            worst = max(worst, fc["equality_residual"])
            c.check(fc["equality_residual"] < 1e-4, f"residual {fc['equality_residual']:.3g} on {f}")
        c.note(f"11 maps, worst equality residual {worst:.2e}")


def test_02_pl_exact_distortion_k():
    with Criterion(2, 1.0) as c:
        f = G.plx()
        value, k, a = pl_exact_distortion(f, Fraction(1, 10), full=True)
        c.check(k == 4, f"k = {k}")
        c.check(abs(value - 2 * LOG2) < 1e-12, f"value {value!r}")
        est = asymptotic_distortion(f, method="sampled", renormalize=False)
        c.check(est.lower - 1e-9 <= value <= est.upper + 1e-9,
                f"bracket [{est.lower}, {est.upper}]")
        c.check(est.upper - est.lower < 1e-9, f"bracket width {est.upper - est.lower:.3g}")
        c.note(f"k = {k}, dist = {value:.15f}, bracket width {est.upper - est.lower:.1e}")


def test_03_fundamental_inequality_gallery():
    with Criterion(3, 30.0) as c:
        rows = []
        for name in ("mobius", "plx", "parabolic", "sternberg"):
            f = G.gallery(name)
            dist = asymptotic_distortion(f)
            M = mather_diffeo(f)
            fc = fundamental_check(f, dist=dist.value, var_dm=M.var)
            c.check(fc["lhs"] <= fc["rhs"] + 1e-4, f"{name}: {fc['lhs']:.6g} > {fc['rhs']:.6g}")
            rows.append(f"{name} {fc['lhs']:.4f}<={fc['rhs']:.4f}")
            if M.trivial:
                lam, mu = f.log_multipliers()
                gap = abs(dist.value - (abs(lam) + abs(mu)))
                c.check(gap < 1e-4, f"{name}: trivial-Mather equality gap {gap:.3g}")
                rows.append(f"{name} trivial, eq gap {gap:.1e}")
        c.check(mather_diffeo(G.mobius()).trivial and mather_diffeo(G.parabolic_flow()).trivial,
                "flow maps should have trivial Mather invariant")
        c.note(", ".join(rows))


def test_04_szekeres_reconstruction():
    with Criterion(4, 20.0) as c:
        f = G.mobius()
        # the standard seed runs the pushforward iteration from c0 (f - id)
        vf = szekeres_field(f, seed="standard")
        c.check(vf.iterations > 1, "iteration did not run")
        tau = float(np.max(np.abs(vf.szekeres_constant() - 1.0)))
        c.check(tau < 1e-7, f"Szekeres constant off by {tau:.3g}")
        x = np.linspace(0.0, 1.0, 2001)
        err = float(np.max(np.abs(vf.flow_map(1.0)._eval(x) - f._eval(x))))
        c.check(err < 1e-7, f"time-one error {err:.3g}")
        third, two = vf.flow_map(1 / 3), vf.flow_map(2 / 3)
        law = float(np.max(np.abs(third._eval(two._eval(x)) - f._eval(x))))
        c.check(law < 1e-6, f"group law error {law:.3g}")
        inv = vf.invariance_residual()
        c.check(inv < 1e-6, f"invariance residual {inv:.3g}")
        for cc in (0.05, 0.1, 0.2):
            vb, lb = variation_bound(vf, cc, 1e-6), l1_bound(vf, cc, 1e-6)
            c.check(vb["holds"], f"variation bound at c={cc}: {vb}")
            c.check(lb["holds"], f"L1 bound at c={cc}: {lb}")
        c.note(f"{vf.iterations} iterations, time-one {err:.1e}, group law {law:.1e}, "
               f"invariance {inv:.1e}, constant {tau:.1e}")


def test_05_averaging_bound():
    with Criterion(5, 30.0) as c:
        worst = -np.inf
        for name in ("mobius", "plx"):
            f = G.gallery(name)
            prev = np.inf
            for n in (2, 4, 8, 16, 32):
                _, conj = box_average_conjugator((f,), n)
                lhs = var_log_D(conj[0])
                rhs = var_log_D(iterate(f, n, fallback=True)) / n
                worst = max(worst, lhs - rhs)
                c.check(lhs <= rhs + 1e-6, f"{name} n={n}: {lhs:.10g} > {rhs:.10g}")
                c.check(rhs <= prev + 1e-12, f"{name} n={n}: bound increased")
                prev = rhs
        c.note(f"max excess over the bound {worst:.2e}")


def test_06_drift():
    with Criterion(6, 30.0) as c:
        f = G.mobius()
        inst = CocycleInstance([f])
        res = cocycle_drift(inst, "g1", n=32)
        dist = asymptotic_distortion(f).value
        c.check(abs(res["drift"] - 2.0) <= 0.02, f"drift {res['drift']}")
        c.check(abs(dist - 2.0) <= 0.02, f"dist {dist}")
        c.check(res["relative_gap"] <= 0.10, f"defect/drift gap {res['relative_gap']:.3g}")
        c.check(res["converse_holds"], "converse lower bound fails")
        c.note(f"drift {res['drift']:.6f}, defect {res['defect']:.6f}, "
               f"gap {res['relative_gap']:.2%}")


def test_07_homotopy_law():
    with Criterion(7, 5.0) as c:
        F = G.mobius()
        v0 = var_log_D(F)
        worst = 0.0
        for t in (0.0, 0.25, 0.5, 0.75, 1.0):
            v = var_log_D(linear_log_homotopy(F, t))
            worst = max(worst, abs(v - (1 - t) * v0))
        c.check(worst < 1e-8, f"homotopy law error {worst:.3g}")
        rows = homotopy_power_bounds(G.gallery("plx-pair"))
        c.check({r["m"] for r in rows} >= {1, 2}, "powers 1 and 2 expected")
        c.check(all(r["holds"] for r in rows), f"power bound fails: {rows}")
        c.note(f"law error {worst:.1e}; {len(rows)} power bounds hold")


def test_08_alpha_multiplier():
    with Criterion(8, 5.0) as c:
        f = G.plx()
        worst = 0.0
        for alpha in (0.25, 0.5, 0.75):
            h = alpha_conjugate(f, alpha)
            got = math.exp(float(h._log_deriv(np.array([0.0]))[0]))
            worst = max(worst, abs(got - 2.0 ** alpha))
            c.check(abs(got - 2.0 ** alpha) < 1e-8, f"alpha={alpha}: Dh(0) = {got!r}")
        c.check(alpha_conjugate(f, 1.0) is f, "alpha = 1 should return the map itself")
        c.note(f"max multiplier error {worst:.1e}")


def test_09_circle_averaging():
    with Criterion(9, 10.0) as c:
        F = G.circle_sine()
        gaps = []
        for n in (4, 8, 16, 32):
            _, lifts = circle_average((F,), n)
            gaps.append(rotation_gap(lifts[0], 0.5))
        c.check(all(b < a for a, b in zip(gaps, gaps[1:])), f"gaps not decreasing: {gaps}")
        R = CircleLift(PLMap.identity(), 0.3)
        fixed = []
        for n in (4, 8, 16, 32):
            _, lifts = circle_average((R,), n)
            fixed.append(rotation_gap(lifts[0], 0.3))
        c.check(max(fixed) == 0.0, f"rotation moved: {fixed}")
        c.note("gaps " + ", ".join(f"{g:.5f}" for g in gaps))


def test_10_sternberg_certificate():
    with Criterion(10, 5.0) as c:
        lam, x0 = -1.0, 0.1
        rows = [G.sternberg_ratio(lam, x0, k) for k in range(21)]
        r = np.array([row["ratio"] for row in rows])
        tele = max(abs(row["ratio"] - row["telescoped"]) for row in rows)
        c.check(tele < 1e-10, f"telescoping error {tele:.3g}")
        c.check(bool(np.all(np.diff(r) < 0)), "ratios not strictly decreasing")
        y = G.sternberg_eval(lam, np.array([x0]))
        resid = abs(float(G._phi(y)[0]) - math.exp(lam) * float(G._phi(np.array([x0]))[0]))
        c.check(resid < 1e-13, f"conjugacy residual {resid:.3g}")
        c.check(r.min() < 0.05,
                f"r_k stays above 0.05 for k <= 20 (r_20 = {r[20]:.5f}, M >= {1 / math.sqrt(r[20]):.3f})")
        c.note(f"r_20 = {r[20]:.5f}")


def test_11_mather_homomorphism():
    with Criterion(11, 20.0) as c:
        rng = np.random.default_rng(7)
        c.check(mather_homomorphism(G.plx()) == 0.0, "phi_M(PL) should be exactly 0")
        c.check(all(mather_homomorphism(G.random_pl(rng, 5)) == 0.0 for _ in range(5)),
                "phi_M of random PL maps should be 0")
        mob = mather_homomorphism(G.mobius())
        c.check(abs(mob + 2.0) < 1e-9, f"phi_M(MOB) = {mob!r}")
        worst = 0.0
        for _ in range(10):
            f = _random_ac(rng)
            g = _random_ac(rng)
            lhs = ac_mass_quadrature(Composition([f, g]))
            rhs = mather_homomorphism(f) + mather_homomorphism(g)
            worst = max(worst, abs(lhs - rhs))
        c.check(worst < 1e-8, f"additivity error {worst:.3g}")
        w = mather_diffeo(G.parabolic_witness())
        c.check(w.var > 0.01, f"witness var {w.var}")
        c.note(f"phi_M(MOB) = {mob:.12f}, additivity {worst:.1e}, witness var {w.var:.4f}")


def _random_ac(rng):
    kind = rng.integers(3)
    if kind == 0:
        return MobiusFlow(float(rng.uniform(-2, 2)))
    if kind == 1:
        # x(1 - x)(a + b x) with a, a + b of the same sign
        a = float(rng.uniform(0.3, 1.5)) * (1 if rng.integers(2) else -1)
        b = float(rng.uniform(-0.25, 0.25)) * abs(a)
        return FlowMap([0.0, a, b - a, -b], float(rng.uniform(0.2, 1.5)))
    return G.parabolic_flow() if rng.integers(2) else G.parabolic_flow().inverse()


def test_12_path_budgets():
    with Criterion(12, 60.0) as c:
        path, stages = staged_alpha_scheme(G.gallery("linearized-mobius"), alpha=0.25, stages=3)
        for s in stages:
            c.check(s["var"] <= s["bound"] * (1 + 1e-3),
                    f"stage {s['stage']}: {s['var']:.6g} > {s['bound']:.6g}")
        reports = [path_report(path)]
        reports.append(path_report(deform(G.gallery("mobius-pair"), "homotopy", samples=9)))
        reports.append(path_report(deform(G.gallery("plx"), "alpha", samples=9)))
        reports.append(path_report(deform(G.gallery("plx-pair"), "scheme34", samples=9)))
        reports.append(path_report(deform(G.gallery("plx-pair"), "homotopy", samples=9)))
        reports.append(path_report(deform(G.gallery("mobius-pair"), "box-average", samples=9)))
        reports.append(path_report(deform((G.gallery("circle-sine"),), "circle-average",
                                          samples=9)))
        for rep in reports:
            c.check(rep["holds"], f"{rep['tag']} path fails: "
                    + ", ".join(ch["name"] for ch in rep["checks"] if not ch["holds"]))
        c.note("stages " + ", ".join(f"{s['var']:.4f}<={s['bound']:.4f} (N={s['n']})"
                                     for s in stages) + f"; {len(reports)} paths pass")
