"""Fixture maps with closed-form ground truth."""

from __future__ import annotations

import json
import math
from importlib import resources

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from ._base import Diffeo1D, DiffeoError, Germ, RootFindingError, affine_germ
from .analytic import Composition, FlowMap, MobiusFlow, SineMap
from .circle import CircleLift
from .grid import _cell_bisect, cell_integrals
from .pl import PLMap
from .roots import newton_polish

# -- the implicit hyperbolic germ --------------------------------------------------

STERNBERG_XMAX = math.exp(-1.0)


def _phi(x):
    x = np.asarray(x, dtype=float)
    return x * (1.0 - np.log(x))


def _solve_phi_log(logc):
    """t = -log y for the y in (0, 1/e] with y (1 - log y) = exp(logc).

    In t the equation reads t - log(1 + t) = -logc.  The left side is convex
    and increasing for t > 0 and at least t/2 once t >= 2.6, so Newton's
    method started at max(-2 logc, 2.6) decreases monotonically to the root.
    """
    target = -np.atleast_1d(np.asarray(logc, dtype=float))
    if np.any(target < 0):
        raise RootFindingError("no solution: value above the germ range")
    t = np.maximum(2.0 * target, 2.6)
    for _ in range(60):
        step = (t - np.log1p(t) - target) * (1.0 + t) / t
        t = t - step
        if np.all(np.abs(step) <= 4e-16 * t):
            break
    return t


def sternberg_eval(lam: float, x):
    """y with y (1 - log y) = e^lam x (1 - log x), for 0 < x <= 1/e, lam < 0."""
    if lam >= 0:
        raise DiffeoError("the germ needs lam < 0")
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(arr <= 0) or np.any(arr > STERNBERG_XMAX * (1 + 1e-15)):
        raise DiffeoError("x must lie in (0, 1/e]")
    logc = lam + np.log(arr) + np.log1p(-np.log(arr))
    y = np.exp(-_solve_phi_log(logc))
    return float(y[0]) if np.ndim(x) == 0 else y


def sternberg_ratio(lam: float, x: float, k: int) -> dict:
    """r_k = f^k(x) / (e^{lam k} x) together with its telescoped form
    (1 - log x) / (1 - log f^k(x)) and the implied bound M >= 1/sqrt(r_k)
    on the bi-Lipschitz constant of any linearizing conjugacy."""
    y = float(x)
    for _ in range(int(k)):
        y = sternberg_eval(lam, y)
    r = y / (math.exp(lam * k) * x)
    tele = (1.0 - math.log(x)) / (1.0 - math.log(y))
    return {"k": int(k), "fk": y, "ratio": r, "telescoped": tele,
            "lipschitz_lower_bound": 1.0 / math.sqrt(r)}


def sternberg_field(lam: float, x):
    x = np.asarray(x, dtype=float)
    return lam * x * (1.0 - 1.0 / np.log(x))


class SternbergMap(Diffeo1D):
    """The implicit germ on (0, 1/e], glued C^1 at 1/e to a cubic tail with
    a parabolic fixed point at 1.

    In u = 1 - x the tail is 1 - f(1 - u) = u + A u^2 + B u^3, with A, B
    matching value and derivative of the germ at x = 1/e.
    """

    def __init__(self, lam: float = -1.0):
        if lam >= 0:
            raise DiffeoError("the germ needs lam < 0")
        self.lam = float(lam)
        self.xm = STERNBERG_XMAX
        self.ym = float(sternberg_eval(self.lam, self.xm))
        self.dm = float(math.exp(self.lam) * math.log(self.xm) / math.log(self.ym))
        um = 1.0 - self.xm
        r = ((1.0 - self.ym) - um) / um**2
        s = (self.dm - 1.0) / um
        b = (s - 2.0 * r) / um
        self.A, self.B = 3.0 * r - s, b
        self.um = um
        uu = np.linspace(0.0, um, 1001)
        if np.any(self._F1(uu) <= 0) or np.any(self.A + self.B * uu[1:] <= 0):
            raise DiffeoError("cubic tail is not a valid extension for this lam")

    # tail in u = 1 - x: F(u) = 1 - f(1 - u)
    def _F(self, u):
        return u + u * u * (self.A + self.B * u)

    def _F1(self, u):
        return 1.0 + u * (2.0 * self.A + 3.0 * self.B * u)

    def _F2(self, u):
        return 2.0 * self.A + 6.0 * self.B * u

    def _germ_eval(self, x):
        logc = self.lam + np.log(x) + np.log1p(-np.log(x))
        return np.exp(-_solve_phi_log(logc))

    def _eval(self, x):
        out = x.copy()
        low = (x > 0) & (x <= self.xm)
        high = x > self.xm
        if np.any(low):
            out[low] = self._germ_eval(x[low])
        if np.any(high):
            out[high] = 1.0 - self._F(1.0 - x[high])
        return out

    def _log_deriv(self, x):
        out = np.empty_like(x)
        zero = x <= 0
        low = (x > 0) & (x <= self.xm)
        high = x > self.xm
        out[zero] = self.lam
        if np.any(low):
            xl = x[low]
            y = self._germ_eval(xl)
            out[low] = self.lam + np.log(-np.log(xl)) - np.log(-np.log(y))
        if np.any(high):
            out[high] = np.log(self._F1(1.0 - x[high]))
        return out

    def _affine_deriv(self, x):
        out = np.zeros_like(x)
        low = (x > 0) & (x <= self.xm)
        high = x > self.xm
        if np.any(low):
            xl = x[low]
            y = self._germ_eval(xl)
            d = math.exp(self.lam) * np.log(xl) / np.log(y)
            out[low] = 1.0 / (xl * np.log(xl)) - d / (y * np.log(y))
        if np.any(high):
            u = 1.0 - x[high]
            out[high] = -self._F2(u) / self._F1(u)
        return out

    def inverse(self):
        return _SternbergInverse(self)

    def reflected(self):
        return _SternbergReflected(self)

    def singular_points(self):
        return np.array([self.xm])

    def germ(self, side):
        if side == "left":
            lam = self.lam
            return Germ(zone=self.xm,
                        field=lambda y: sternberg_field(lam, y),
                        dlog=lambda y: 1.0 / y + 1.0 / (y * np.log(y) * (np.log(y) - 1.0)))
        return None

    def log_multipliers(self):
        return self.lam, 0.0

    def to_spec(self):
        return {"type": "sternberg", "lambda": self.lam}

    def __repr__(self):
        return f"SternbergMap({self.lam!r})"


class _SternbergInverse(Diffeo1D):
    def __init__(self, f: SternbergMap):
        self.f = f

    def _eval(self, y):
        f = self.f
        out = y.copy()
        low = (y > 0) & (y <= f.ym)
        high = (y > f.ym) & (y < 1)
        if np.any(low):
            yl = y[low]
            logc = -f.lam + np.log(yl) + np.log1p(-np.log(yl))
            out[low] = np.exp(-_solve_phi_log(logc))
        if np.any(high):
            out[high] = 1.0 - _tail_inverse(f, 1.0 - y[high])
        return out

    def _log_deriv(self, y):
        return -self.f._log_deriv(self._eval(y))

    def _affine_deriv(self, y):
        x = self._eval(y)
        return -self.f._affine_deriv(x) / self.f._deriv(x)

    def inverse(self):
        return self.f

    def reflected(self):
        return self.f.reflected().inverse()

    def singular_points(self):
        return np.array([self.f.ym])

    def germ(self, side):
        g = self.f.germ(side)
        if g is None:
            return None
        return Germ(zone=g.zone, field=lambda y: -g.field(y), dlog=g.dlog, kind=g.kind)

    def log_multipliers(self):
        return -self.f.lam, 0.0

    def to_spec(self):
        return {"type": "inverse", "map": self.f.to_spec()}


def _tail_inverse(f: SternbergMap, v):
    """u in (0, um) with F(u) = v (F(u) >= u, so u <= v).

    Safeguarded Newton from the second-order guess; points that do not
    settle fall back to bisection."""
    lo = np.zeros_like(v)
    hi = np.minimum(v, f.um)
    u = np.clip(v / (1.0 + f.A * v), lo, hi)
    done = np.zeros(v.shape, bool)
    for _ in range(40):
        step = (f._F(u) - v) / f._F1(u)
        u = np.clip(u - step, lo, hi)
        done = np.abs(step) <= 4e-16 * np.maximum(u, 1e-300)
        if np.all(done):
            return u
    bad = ~done
    a, b = _cell_bisect(f._F, v[bad], lo[bad], hi[bad])
    u[bad] = newton_polish(f._F, f._F1, v[bad], 0.5 * (a + b), a, b)
    return u


class _SternbergReflected(Diffeo1D):
    """u -> 1 - f(1 - u) evaluated without cancellation near u = 0."""

    def __init__(self, f: SternbergMap):
        self.f = f

    def _eval(self, u):
        f = self.f
        out = np.empty_like(u)
        tail = u < f.um
        out[tail] = f._F(u[tail])
        if np.any(~tail):
            out[~tail] = 1.0 - f._eval(1.0 - u[~tail])
        return out

    def _log_deriv(self, u):
        f = self.f
        out = np.empty_like(u)
        tail = u < f.um
        out[tail] = np.log(f._F1(u[tail]))
        if np.any(~tail):
            out[~tail] = f._log_deriv(1.0 - u[~tail])
        return out

    def _affine_deriv(self, u):
        f = self.f
        out = np.empty_like(u)
        tail = u < f.um
        out[tail] = f._F2(u[tail]) / f._F1(u[tail])
        if np.any(~tail):
            out[~tail] = -f._affine_deriv(1.0 - u[~tail])
        return out

    def inverse(self):
        return _SternbergReflectedInverse(self.f)

    def reflected(self):
        return self.f

    def singular_points(self):
        return np.array([1.0 - self.f.xm])

    def germ(self, side):
        return self.f.germ("left") if side == "right" else None

    def log_multipliers(self):
        return 0.0, self.f.lam


class _SternbergReflectedInverse(Diffeo1D):
    def __init__(self, f: SternbergMap):
        self.f = f
        self.r = _SternbergReflected(f)

    def _eval(self, v):
        f = self.f
        out = np.empty_like(v)
        tail = v < 1.0 - f.ym
        if np.any(tail):
            out[tail] = _tail_inverse(f, v[tail])
        if np.any(~tail):
            out[~tail] = 1.0 - f.inverse()._eval(1.0 - v[~tail])
        return out

    def _log_deriv(self, v):
        return -self.r._log_deriv(self._eval(v))

    def _affine_deriv(self, v):
        u = self._eval(v)
        return -self.r._affine_deriv(u) / self.r._deriv(u)

    def inverse(self):
        return self.r

    def reflected(self):
        return self.f.inverse()

    def singular_points(self):
        return np.array([1.0 - self.f.ym])


def affine_germ_power(g: Germ, n: int) -> Germ | None:
    """Affine germ of the n-th iterate of a map with affine germ ``g``
    (None when the multiplier leaves the float range)."""
    logs = float(g.field(np.array([1.0]))[0])
    zone = g.zone
    if n < 0:
        zone, logs, n = math.exp(logs) * zone, -logs, -n
    if n == 0:
        return affine_germ(1.0, 1.0)
    if abs(n * logs) > 700:
        return None
    if logs > 0:
        zone = zone * math.exp(-(n - 1) * logs)
    return affine_germ(math.exp(n * logs), zone)


# -- a conjugator that linearizes the Moebius flow near both ends --------------------

class EndLinearizer(Diffeo1D):
    """k with k(x) = c x / (1 - x) on [0, delta] and 1 - k(x) = c (1 - x) / x
    on [1 - delta, 1]; symmetric (k(1 - x) = 1 - k(x)), smooth in between.

    Conjugating a Moebius flow map by k makes it exactly linear near 0 and 1.
    """

    _CELLS = 2048

    def __init__(self, delta: float = 0.25):
        if not 0 < delta < 0.5:
            raise DiffeoError("delta must lie in (0, 1/2)")
        self.delta = d = float(delta)
        nodes = np.linspace(d, 1 - d, self._CELLS + 1)
        cells = cell_integrals(lambda t: np.exp(self._u(t)), nodes)
        mid_total = float(np.sum(cells))
        self.c = 1.0 / (2 * d / (1 - d) + mid_total)
        left = np.concatenate([[0.0], np.cumsum(cells)])
        right = mid_total - left
        vals = np.where(left <= mid_total / 2,
                        self.c * (d / (1 - d) + left),
                        1.0 - self.c * (d / (1 - d) + right))
        self._nodes = nodes
        self._vals = vals
        self._spl = CubicHermiteSpline(nodes, vals, self.c * np.exp(self._u(nodes)))
        self._d1 = self._spl.derivative()

    def _beta(self, x):
        t = np.clip((x - self.delta) / (1 - 2 * self.delta), 0.0, 1.0)
        return t**3 * (10 - 15 * t + 6 * t**2)

    def _dbeta(self, x):
        w = 1 - 2 * self.delta
        t = np.clip((x - self.delta) / w, 0.0, 1.0)
        return 30 * t**2 * (1 - t) ** 2 / w

    def _u(self, x):
        x = np.asarray(x, dtype=float)
        b = self._beta(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            lo = np.where(b < 1, (1 - b) * np.log1p(-x), 0.0)
            hi = np.where(b > 0, b * np.log(x), 0.0)
        return -2.0 * (lo + hi)

    def _du(self, x):
        b, db = self._beta(x), self._dbeta(x)
        return -2.0 * (db * (np.log(x) - np.log1p(-x)) + (1 - b) / (x - 1) + b / x)

    def _eval(self, x):
        d, c = self.delta, self.c
        out = np.empty_like(x)
        lo, hi = x <= d, x >= 1 - d
        mid = ~(lo | hi)
        out[lo] = c * x[lo] / (1 - x[lo])
        out[hi] = 1 - c * (1 - x[hi]) / x[hi]
        out[mid] = self._spl(x[mid])
        return out

    def _log_deriv(self, x):
        return math.log(self.c) + self._u(x)

    def _affine_deriv(self, x):
        return self._du(x)

    def inverse(self):
        return _EndLinearizerInverse(self)

    def reflected(self):
        return self


class _EndLinearizerInverse(Diffeo1D):
    def __init__(self, k: EndLinearizer):
        self.k = k
        self.ylo = k.c * k.delta / (1 - k.delta)

    def _eval(self, y):
        k, c = self.k, self.k.c
        out = np.empty_like(y)
        lo, hi = y <= self.ylo, y >= 1 - self.ylo
        mid = ~(lo | hi)
        out[lo] = y[lo] / (c + y[lo])
        out[hi] = 1 - (1 - y[hi]) / (c + 1 - y[hi])
        if np.any(mid):
            t = y[mid]
            i = np.clip(np.searchsorted(k._vals, t, side="right") - 1, 0,
                        k._nodes.size - 2)
            a, b = _cell_bisect(k._spl, t, k._nodes[i], k._nodes[i + 1])
            x = newton_polish(k._spl, k._d1, t, 0.5 * (a + b), a, b)
            out[mid] = x
        return out

    def _log_deriv(self, y):
        return -self.k._log_deriv(self._eval(y))

    def _affine_deriv(self, y):
        x = self._eval(y)
        return -self.k._affine_deriv(x) / self.k._deriv(x)

    def inverse(self):
        return self.k

    def reflected(self):
        return self


class Conjugate(Composition):
    """h o f o h^{-1}, iterated and inverted through f."""

    def __init__(self, h, f, germs=None):
        self.h, self.f = h, f
        super().__init__([h, f, h.inverse()], germs)
        self.maps = (h, f, h.inverse())

    def iterate(self, n: int):
        from .core import iterate
        germs = {side: affine_germ_power(g, n) for side, g in self._germs.items()}
        germs = {side: g for side, g in germs.items() if g is not None}
        return Conjugate(self.h, iterate(self.f, n), germs)

    def inverse(self):
        germs = {side: affine_germ_power(g, -1) for side, g in self._germs.items()}
        return Conjugate(self.h, self.f.inverse(), germs)

    def to_spec(self):
        return {"type": "compose", "maps": [self.h.to_spec(), self.f.to_spec(),
                                            {"type": "inverse", "map": self.h.to_spec()}]}


def linearized_mobius(lam: float = 1.0, delta: float = 0.25) -> Conjugate:
    """k o MOB_lam o k^{-1}: the time-lam Moebius map made exactly linear
    (multiplier e^lam at 0, e^-lam at 1) near both ends."""
    if lam <= 0:
        raise DiffeoError("lam must be positive")
    k = EndLinearizer(delta)
    m = MobiusFlow(lam)
    zone_left = float(k(m.inverse()(delta)))
    zone_right = float(k(delta))
    germs = {"left": affine_germ(math.exp(lam), zone_left),
             "right": affine_germ(math.exp(-lam), zone_right)}
    return Conjugate(k, m, germs)


# -- fixtures -----------------------------------------------------------------------

def mobius() -> MobiusFlow:
    return MobiusFlow(1.0)


def plx() -> PLMap:
    return PLMap(["0", "1/4", "3/4", "1"], ["2", "3/4", "1/2"])


def parabolic_flow() -> FlowMap:
    """Time-1 map of x^2 (1 - x): parabolic at 0, multiplier 1/e at 1."""
    return FlowMap([0.0, 0.0, 1.0, -1.0], 1.0)


def parabolic_witness() -> Composition:
    """2x/(1+x) after the PL map with slopes 1/2, 2 (break at 2/3).

    Both ends are parabolic and the absolutely continuous part of
    d log Df integrates to -2 log 2, so the Mather invariant is nontrivial.
    """
    pl = PLMap(["0", "2/3", "1"], ["1/2", "2"])
    return Composition([MobiusFlow(math.log(2.0)), pl])


def circle_sine(amp: float = 0.1, rotation: float = 0.5) -> CircleLift:
    return CircleLift(SineMap(amp), rotation)


def random_pl(rng: np.random.Generator, pieces: int = 4, denom: int = 64,
              above: bool | None = None) -> PLMap:
    """Random exact PL map without interior fixed points.

    Breakpoints and their images are multiples of 1/denom, so slopes are
    rational; the graph stays strictly above the diagonal (or below when
    ``above`` is False; random when None).
    """
    from fractions import Fraction
    if pieces < 2:
        raise DiffeoError("need at least two pieces")
    if above is None:
        above = bool(rng.integers(2))
    k = pieces - 1
    for _ in range(10000):
        b = np.sort(rng.choice(np.arange(1, denom), k, replace=False))
        y = np.sort(rng.choice(np.arange(1, denom), k, replace=False))
        if (np.all(y > b) if above else np.all(y < b)):
            break
    else:
        raise DiffeoError("could not sample a fixed-point-free PL map")
    bps = [Fraction(0)] + [Fraction(int(v), denom) for v in b] + [Fraction(1)]
    vals = [Fraction(0)] + [Fraction(int(v), denom) for v in y] + [Fraction(1)]
    return PLMap.from_values(bps, vals)


_FIXTURES = {
    "mobius": mobius,
    "plx": plx,
    "identity": lambda: PLMap.identity(),
    "parabolic": parabolic_flow,
    "sternberg": lambda: SternbergMap(-1.0),
    "parabolic-witness": parabolic_witness,
    "linearized-mobius": linearized_mobius,
    "circle-sine": circle_sine,
}

_ACTIONS = {
    "mobius-pair": lambda: (MobiusFlow(1.0), MobiusFlow(0.5)),
    "plx-pair": lambda: (plx(), _plx_squared()),
}


def _plx_squared():
    from .pl import pl_iterate
    return pl_iterate(plx(), 2)


def names() -> list[str]:
    return sorted(list(_FIXTURES) + list(_ACTIONS))


def gallery(name: str):
    """The named fixture map (or tuple of generators for action fixtures)."""
    if name in _FIXTURES:
        return _FIXTURES[name]()
    if name in _ACTIONS:
        return _ACTIONS[name]()
    raise KeyError(f"unknown gallery fixture {name!r}; known: {', '.join(names())}")


def records() -> dict:
    """Committed ground-truth records, keyed by fixture name."""
    text = resources.files("diffeo1d").joinpath("data/gallery_records.json").read_text()
    return json.loads(text)


def record(name: str) -> dict:
    recs = records()
    if name not in recs:
        raise KeyError(f"no record for {name!r}")
    return recs[name]
