"""Generating (Szekeres) vector fields, their charts and flow maps.

All constructions run on a map h with h(x) > x on (0, 1) and build its
field near 0 ("left core").  Other cases are reduced to this one: a map
moving points left is replaced by its inverse (the field changes sign) and
the field at 1 is the left field of the reflected map u -> 1 - f(1 - u).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._base import ConvergenceError, Diffeo1D, DiffeoError, DomainError
from .core import delta_sign
from .grid import _cell_bisect, cell_integrals
from .roots import newton_polish

MAX_STEPS = 100_000
DEFAULT_TOL = 1e-9
DEFAULT_CAP = 200
STOP_SAMPLES = 513
_CENTRAL_WEIGHTS = (4 / 5, -1 / 5, 4 / 105, -1 / 280)


def _log_field_seed(h, mode: str):
    """Seed vector field near 0 as (log seed, D log seed, kind, zone, c0).

    ``mode``: 'auto' uses an exact germ when the map provides one, then the
    normalized displacement c0 (h - id) for hyperbolic points and a
    time derivative of the interpolated orbit for parabolic points (which
    matches the formal generator to high order, so the pushforwards settle
    quickly); 'standard' always uses c0 (h - id) with
    c0 = log Dh(0) / (Dh(0) - 1) (c0 = 1 when parabolic); 'orbit' forces
    the orbit interpolant.
    """
    lam = h.log_multipliers()[0]
    parabolic = abs(lam) < 1e-12
    c0 = 1.0 if parabolic else lam / math.expm1(lam)
    germ = h.germ("left") if mode == "auto" else None
    if germ is not None:
        def logs(z):
            return np.log(germ.field(z))

        def dlogs(z):
            return germ.dlog(z)

        return logs, dlogs, "germ", float(germ.zone), c0
    if mode == "standard" or (mode == "auto" and not parabolic):
        def logs(z):
            return math.log(c0) + np.log(h._eval(z) - z)

        def dlogs(z):
            return (np.exp(h._log_deriv(z)) - 1.0) / (h._eval(z) - z)

        return logs, dlogs, "displacement", 0.0, c0

    hinv = h.inverse()

    def orbit_field(z):
        # d/dt of the orbit interpolant at t = 0 (central differences, order 8)
        fw, bw = z, z
        total = np.zeros_like(z)
        for w in _CENTRAL_WEIGHTS:
            fw = h._eval(fw)
            bw = hinv._eval(bw)
            total = total + w * ((fw - z) - (bw - z))
        return total

    def logs(z):
        return np.log(orbit_field(z))

    def dlogs(z):
        eps = 1e-5 * z
        return (logs(z + eps) - logs(z - eps)) / (2 * eps)

    return logs, dlogs, "orbit", 0.0, 1.0


class LeftCore:
    """Field of h (h(x) > x) near 0, by pushing a seed field forward."""

    def __init__(self, h: Diffeo1D, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_CAP,
                 seed: str = "auto", anchor: float | None = None):
        if tol <= 0:
            raise DiffeoError("tol must be positive")
        self.h = h
        self.hinv = h.inverse()
        self.lam = float(h.log_multipliers()[0])
        self._logs, self._dlogs, self.seed_kind, self.zone, self.c0 = \
            _log_field_seed(h, seed)
        if anchor is None:
            anchor = 0.5 * (float(self.hinv._eval(np.array([0.5]))[0]) + 0.5)
        self.c = float(anchor)
        self.tol = tol
        self.history: list[float] = []
        self._converge(max_iter)

    def _converge(self, max_iter: int):
        c, hc = self.c, float(self.h._eval(np.array([self.c]))[0])
        s = np.linspace(c, hc, STOP_SAMPLES)
        if self.seed_kind == "germ":
            z = s.copy()
            n = 0
            while np.max(z) > self.zone:
                z = self.hinv._eval(z)
                n += 1
                if n > MAX_STEPS:
                    raise ConvergenceError("orbit does not reach the germ zone")
            self.iterations = n
            self.z_stop = self.zone
            self.history = [0.0]
            return
        z = s.copy()
        acc = np.zeros_like(s)
        prev = self._logs(z)
        for n in range(1, max_iter + 1):
            z = self.hinv._eval(z)
            acc = acc + self.h._log_deriv(z)
            cur = self._logs(z) + acc
            d = cur - prev
            dist = float(abs(d[0]) + np.sum(np.abs(np.diff(d))))
            self.history.append(dist)
            prev = cur
            if dist < self.tol:
                self.iterations = n
                self.z_stop = float(z[0])
                return
        raise ConvergenceError(
            f"field iteration did not reach BV distance {self.tol} in {max_iter} steps",
            self.history)

    # -- evaluation ---------------------------------------------------------------
    def _descend(self, x, record: bool = False):
        z = np.array(x, dtype=float, copy=True)
        acc = np.zeros_like(z)
        chain = []
        active = z > self.z_stop
        steps = 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            zi = self.hinv._eval(z[idx])
            if record:
                chain.append((idx, zi))
            z[idx] = zi
            acc[idx] += self.h._log_deriv(zi)
            active[idx] = zi > self.z_stop
            steps += 1
            if steps > MAX_STEPS:
                raise DomainError("point too close to the far endpoint for this field")
        return z, acc, chain

    def log_field(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0) or np.any(x >= 1):
            raise DomainError("field evaluated outside (0, 1)")
        z, acc, _ = self._descend(x.ravel())
        return (self._logs(z) + acc).reshape(x.shape)

    def field(self, x):
        return np.exp(self.log_field(x))

    def dlog_field(self, x):
        """D log X via d(h z) = (d(z) + Lh(z)) / Dh(z) from the seed upward."""
        x = np.asarray(x, dtype=float)
        z, _, chain = self._descend(x.ravel(), record=True)
        d = np.array(self._dlogs(z), dtype=float)
        for idx, zi in reversed(chain):
            d[idx] = (d[idx] + self.h._affine_deriv(zi)) / np.exp(self.h._log_deriv(zi))
        return d.reshape(x.shape)

    def singular_orbit(self, b: float, hb: float) -> np.ndarray:
        """Images in [b, h(b)) of the singular points of h (where log X may jump)."""
        sp = np.asarray(self.h.singular_points(), dtype=float)
        sp = sp[(sp > 0) & (sp < 1)]
        out = []
        for p in sp:
            q = np.array([p])
            for _ in range(MAX_STEPS):
                if q[0] < b:
                    q = self.h._eval(q)
                elif q[0] >= hb:
                    q = self.hinv._eval(q)
                else:
                    break
            if b <= q[0] < hb:
                out.append(float(q[0]))
        return np.unique(out)


class Chart:
    """P with P' = 1/X, P(a) = 0 and P(h x) = P(x) + 1, with inverse psi."""

    def __init__(self, core: LeftCore, a: float, b: float | None = None, nodes: int = 1025):
        if not 0 < a < 1:
            raise DiffeoError("base point must lie in (0, 1)")
        self.core = core
        h = core.h
        self.a = float(a)
        b = self.a if b is None else float(b)
        hb = float(h._eval(np.array([b]))[0])
        self.b, self.hb = b, hb
        pts = np.linspace(b, hb, nodes)
        pts = np.unique(np.concatenate([pts, core.singular_orbit(b, hb)]))
        inv = lambda t: np.exp(-core.log_field(t))
        cells = cell_integrals(inv, pts)
        tau = float(np.sum(cells))
        self.tau = tau
        cum = np.concatenate([[0.0], np.cumsum(cells)]) / tau
        cum[-1] = 1.0
        self._x = pts
        self._p = cum
        self._spl = CubicHermiteSpline(pts, cum, inv(pts) / tau)
        self._d1 = self._spl.derivative()
        self._offset = float(self._local(np.array([self.a]))[0])

    # P restricted to [b, h b) with value 0 at b
    def _local(self, x):
        return self._spl(x)

    def _to_domain(self, x):
        """(j, z) with z = h^{-j}(x) in [b, h b]."""
        h, hinv = self.core.h, self.core.hinv
        z = np.array(x, dtype=float, copy=True)
        j = np.zeros(z.shape, dtype=np.int64)
        # one direction at a time, so rounding at b or h(b) cannot cycle
        for step, sel, dj in ((h, lambda v: v < self.b, -1), (hinv, lambda v: v > self.hb, 1)):
            mask = sel(z)
            n = 0
            while np.any(mask):
                z[mask] = step._eval(z[mask])
                j[mask] += dj
                mask = sel(z)
                n += 1
                if n > MAX_STEPS:
                    raise DomainError(
                        "chart evaluation needs too many steps (point too close to an end)")
        return j, z

    def P(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x <= 0) or np.any(x >= 1):
            raise DomainError("chart is a bijection (0, 1) -> R; endpoints excluded")
        j, z = self._to_domain(x.ravel())
        return (self._local(z) + j - self._offset).reshape(x.shape)

    def _psi_local(self, s):
        i = np.clip(np.searchsorted(self._p, s, side="right") - 1, 0, self._x.size - 2)
        lo, hi = _cell_bisect(self._spl, s, self._x[i], self._x[i + 1])
        return newton_polish(self._spl, self._d1, s, 0.5 * (lo + hi), lo, hi)

    def psi(self, t):
        t = np.asarray(t, dtype=float)
        shape = t.shape
        s = t.ravel() + self._offset
        j = np.floor(s)
        z = self._psi_local(s - j)
        h, hinv = self.core.h, self.core.hinv
        j = j.astype(np.int64)
        if np.max(np.abs(j), initial=0) > MAX_STEPS:
            raise DomainError("chart inverse needs too many steps")
        for _ in range(int(np.max(np.abs(j), initial=0))):
            pos, neg = j > 0, j < 0
            if np.any(pos):
                z[pos] = h._eval(z[pos])
                j[pos] -= 1
            if np.any(neg):
                z[neg] = hinv._eval(z[neg])
                j[neg] += 1
        return z.reshape(shape)

    def local(self, x):
        """P - P(b) on [b, h b] (no orbit stepping)."""
        return self._local(np.asarray(x, dtype=float))

    def psi_local(self, s):
        return self._psi_local(np.asarray(s, dtype=float))


class CoreFlow(Diffeo1D):
    """Time-tau map of the left core field: psi(tau + P(x))."""

    def __init__(self, chart: Chart, tau: float):
        self.chart = chart
        self.tau = float(tau)

    def _eval(self, x):
        out = x.copy()
        inner = (x > 0) & (x < 1)
        if np.any(inner):
            out[inner] = self.chart.psi(self.tau + self.chart.P(x[inner]))
        return out

    def _log_deriv(self, x):
        core = self.chart.core
        out = np.empty_like(x)
        inner = (x > 0) & (x < 1)
        out[x <= 0] = self.tau * core.lam
        out[x >= 1] = np.nan
        if np.any(inner):
            xi = x[inner]
            y = self._eval(xi)
            out[inner] = core.log_field(y) - core.log_field(xi)
        return out

    def inverse(self):
        return CoreFlow(self.chart, -self.tau)

    def is_identity(self):
        return self.tau == 0.0


class FieldFlowMap(Diffeo1D):
    """Flow of a VectorField1D in original coordinates."""

    def __init__(self, vf: "VectorField1D", t: float):
        self.vf = vf
        self.t = float(t)
        # on the right the core lives in u = 1 - x, where the field changes sign
        tau = vf.sign * self.t if vf.side == "left" else -vf.sign * self.t
        self._flow = CoreFlow(vf.chart_core(), tau)

    def _eval(self, x):
        if self.vf.side == "left":
            return self._flow._eval(x)
        return 1.0 - self._flow._eval(1.0 - x)

    def _log_deriv(self, x):
        out = np.empty_like(x)
        inner = (x > 0) & (x < 1)
        lam0, lam1 = self.vf.log_multipliers()
        out[x <= 0] = self.t * lam0
        out[x >= 1] = self.t * lam1
        if np.any(inner):
            xi = x[inner]
            if self.vf.side == "left":
                out[inner] = self._flow._log_deriv(xi)
            else:
                out[inner] = self._flow._log_deriv(1.0 - xi)
        return out

    def inverse(self):
        return FieldFlowMap(self.vf, -self.t)

    def is_identity(self):
        return self.t == 0.0


@dataclass
class VectorField1D:
    """Generating field of f at one end, in original coordinates.

    ``sign`` relates it to the core: X_f(x) = sign * X_core(x) on the left,
    Y_f(x) = sign * X_core(1 - x) on the right.
    """

    f: Diffeo1D
    side: str
    core: LeftCore
    sign: int
    diagnostics: dict = field(default_factory=dict)
    _chart: Chart | None = None

    @property
    def c0(self) -> float:
        return self.core.c0

    @property
    def iterations(self) -> int:
        return self.core.iterations

    def _coord(self, x):
        x = np.asarray(x, dtype=float)
        return x if self.side == "left" else 1.0 - x

    def __call__(self, x):
        return self.sign * self.core.field(self._coord(x))

    def log_abs(self, x):
        return self.core.log_field(self._coord(x))

    def dlog(self, x):
        """D log |X| in original coordinates."""
        d = self.core.dlog_field(self._coord(x))
        return d if self.side == "left" else -d

    def log_multipliers(self):
        return tuple(float(v) for v in self.f.log_multipliers())

    def multiplier(self) -> float:
        """log Df at the end where the field is built."""
        lm = self.f.log_multipliers()
        return float(lm[0] if self.side == "left" else lm[1])

    def chart_core(self) -> Chart:
        if self._chart is None:
            c = self.core.c
            self._chart = Chart(self.core, c)
        return self._chart

    def chart(self, a: float) -> "ChartMap":
        return ChartMap(self, a)

    def flow_map(self, t: float) -> Diffeo1D:
        if t == 0:
            from .pl import PLMap
            return PLMap.identity()
        return FieldFlowMap(self, t)

    def invariance_residual(self, a: float | None = None, samples: int = 257) -> float:
        """sup over [a, f(a)] of |X(f x) - X(x) Df(x)| / |X(x)|.

        Points within 1e-9 of the orbit of a break of f are skipped: log X
        jumps there and the identity only holds for matching one-sided
        values."""
        f = self.f
        if a is None:
            a = 0.5
        fa = float(f._eval(np.array([a]))[0])
        lo, hi = min(a, fa), max(a, fa)
        x = np.linspace(lo, hi, samples)
        z = self._coord(x)
        zlo = float(np.min(z))
        h = self.core.h
        orb = self.core.singular_orbit(zlo, float(h._eval(np.array([zlo]))[0]))
        if orb.size:
            orb = np.concatenate([orb, h._eval(orb), self.core.hinv._eval(orb)])
            x = x[np.min(np.abs(z[:, None] - orb[None, :]), axis=1) > 1e-9]
        lx = self.log_abs(x)
        lfx = self.log_abs(f._eval(x))
        return float(np.max(np.abs(np.expm1(lfx - lx - f._log_deriv(x)))))

    def szekeres_constant(self, points=None) -> np.ndarray:
        """int_x^{h(x)} du / X(u) for the core map at sample points in core
        coordinates (1 for the generating field)."""
        core = self.core
        if points is None:
            points = np.linspace(core.c, 0.5 + 0.5 * core.c, 10)
        out = []
        for z in np.atleast_1d(points):
            nodes, _ = _fundamental_nodes(core, float(z), 257)
            out.append(float(np.sum(cell_integrals(
                lambda u: np.exp(-core.log_field(u)), nodes))))
        return np.array(out)


def szekeres_field(f: Diffeo1D, side: str = "left", tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_CAP, seed: str = "auto",
                   anchor: float | None = None) -> VectorField1D:
    """Generating vector field of a map without interior fixed points."""
    if side not in ("left", "right"):
        raise DiffeoError("side must be 'left' or 'right'")
    s = delta_sign(f)
    if s == 0:
        raise DiffeoError("interior fixed point detected; the map is not fixed-point free")
    if side == "left":
        h = f if s > 0 else f.inverse()
    else:
        r = f.reflected()
        h = r.inverse() if s > 0 else r
    core = LeftCore(h, tol=tol, max_iter=max_iter, seed=seed, anchor=anchor)
    vf = VectorField1D(f=f, side=side, core=core, sign=s)
    vf.diagnostics = {
        "side": side,
        "c0": core.c0,
        "seed": core.seed_kind,
        "iterations": core.iterations,
        "bv_distances": list(core.history),
        "anchor": core.c,
        "multiplier": vf.multiplier(),
    }
    return vf


class ChartMap:
    """P_X (or P_Y) in original coordinates with base point a, and its inverse."""

    def __init__(self, vf: VectorField1D, a: float):
        self.vf = vf
        self.a = float(a)
        u = a if vf.side == "left" else 1.0 - a
        self._chart = Chart(vf.core, u)

    def P(self, x):
        vf = self.vf
        x = np.asarray(x, dtype=float)
        if vf.side == "left":
            return vf.sign * self._chart.P(x)
        return -vf.sign * self._chart.P(1.0 - x)

    def psi(self, t):
        vf = self.vf
        t = np.asarray(t, dtype=float)
        if vf.side == "left":
            return self._chart.psi(vf.sign * t)
        return 1.0 - self._chart.psi(-vf.sign * t)

    @property
    def tau(self) -> float:
        return self._chart.tau


# -- quantitative bounds on the field -------------------------------------------

def _fundamental_nodes(core: LeftCore, c: float, n: int = 2049):
    hc = float(core.h._eval(np.array([c]))[0])
    pts = np.linspace(c, hc, n)
    return np.unique(np.concatenate([pts, core.singular_orbit(c, hc)])), hc


def variation_bound(vf: VectorField1D, c: float, slack: float = 1e-6) -> dict:
    """Compare var(log X; [c, h c]) with |log Dh(0)|; the gap is at most
    var(log Dh; [0, c]).  Computed for the core map h (h(x) > x) at its
    attracting-away end."""
    from .core import var_log_D
    core = vf.core
    x, _ = _fundamental_nodes(core, c)
    lx = core.log_field(x)
    var_x = float(np.sum(np.abs(np.diff(lx))))
    lhs = abs(var_x - abs(core.lam))
    rhs = var_log_D(core.h, (0.0, c))
    return {"c": c, "lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + slack)}


def l1_bound(vf: VectorField1D, c: float, slack: float = 1e-6) -> dict:
    """Compare the L1 norm of D log X - log Dh(0)/X on [c, h c] with the L1
    norm of the affine derivative of h on [0, c]."""
    core = vf.core
    x, _ = _fundamental_nodes(core, c, 513)
    lam = core.lam

    def gap(u):
        return np.abs(core.dlog_field(u) - lam * np.exp(-core.log_field(u)))

    lhs = float(np.sum(cell_integrals(gap, x)))
    sp = np.asarray(core.h.singular_points(), dtype=float)
    geo = c * np.geomspace(1e-12, 1.0, 1025)
    nodes = np.unique(np.concatenate([[0.0], geo, sp[(sp > 0) & (sp < c)]]))
    rhs = float(np.sum(cell_integrals(lambda u: np.abs(core.h._affine_deriv(u)), nodes)))
    return {"c": c, "lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs + slack)}
