"""Primitive operations on map representations."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from ._base import BreakpointOverflow, Diffeo1D, DiffeoError
from .analytic import Composition, FlowMap, MobiusFlow
from .circle import CircleLift, LiftComposition, lift_iterate
from .grid import GridMap, standard_grid
from .pl import BREAKPOINT_CAP, PLMap, is_delta_class_pl, pl_compose, pl_iterate

SINGULAR_OFFSET = 1e-11


def identity() -> PLMap:
    return PLMap.identity()


def evaluate(f, x):
    """(f(x), Df(x)).  Exact rationals for exact PL maps at rational x."""
    if isinstance(f, PLMap) and f.exact and isinstance(x, (int, Fraction, str)):
        return f.value_at(x), f.slope_at(Fraction(x))
    if isinstance(f, (CircleLift, LiftComposition)):
        return f(x), f.deriv(x) if hasattr(f, "deriv") else np.exp(f.log_deriv(x))
    return f(x), f.deriv(x)


def invert(f):
    return f.inverse()


def compose(f, g, cap: int = BREAKPOINT_CAP, fallback: bool = False):
    """f o g.  PL inputs stay PL; with ``fallback`` an overflowing PL
    composition is returned as a grid map instead of raising."""
    if isinstance(f, (CircleLift, LiftComposition)) or \
            isinstance(g, (CircleLift, LiftComposition)):
        return LiftComposition([f, g])
    if isinstance(f, PLMap) and isinstance(g, PLMap):
        try:
            return pl_compose(f, g, cap)
        except BreakpointOverflow:
            if not fallback:
                raise
            return to_grid(Composition([f, g]))
    if isinstance(f, MobiusFlow) and isinstance(g, MobiusFlow):
        return MobiusFlow(f.lam + g.lam)
    if isinstance(f, FlowMap) and isinstance(g, FlowMap) and f.coeffs == g.coeffs:
        return FlowMap(f.coeffs, f.time + g.time)
    if f.is_identity():
        return g
    if g.is_identity():
        return f
    return Composition([f, g])


def iterate(f, n: int, cap: int = BREAKPOINT_CAP, fallback: bool = False):
    """f^n; negative n iterates the inverse, n = 0 gives the identity."""
    n = int(n)
    if isinstance(f, (CircleLift, LiftComposition)):
        return lift_iterate(f, n)
    if n == 0:
        return PLMap.identity() if not isinstance(f, PLMap) or f.exact \
            else PLMap([0.0, 1.0], [1.0])
    if isinstance(f, PLMap):
        try:
            return pl_iterate(f, n, cap)
        except BreakpointOverflow:
            if not fallback:
                raise
            return to_grid(Composition([f if n > 0 else f.inverse()] * abs(n)))
    if hasattr(f, "iterate"):
        return f.iterate(n)
    if isinstance(f, MobiusFlow):
        return MobiusFlow(n * f.lam)
    if isinstance(f, FlowMap):
        return FlowMap(f.coeffs, n * f.time)
    base = f if n > 0 else f.inverse()
    return Composition([base] * abs(n))


def to_grid(f: Diffeo1D, grid=None) -> GridMap:
    """Sample a map on a grid (Hermite data from the exact derivative)."""
    grid = standard_grid() if grid is None else np.asarray(grid, dtype=float)
    sp = f.singular_points()
    nodes = np.unique(np.concatenate([grid, sp])) if sp.size else grid
    y = f._eval(nodes)
    dy = np.exp(f._log_deriv(nodes))
    return GridMap(nodes, y, dy, singular=sp)


# -- variation of the log-derivative -------------------------------------------

def _sample_points(f, a: float, b: float, grid):
    grid = standard_grid() if grid is None else np.asarray(grid, dtype=float)
    scale = max(b - a, 1e-300)
    pts = [grid[(grid > a) & (grid < b)], [a, b]]
    sp = np.asarray(f.singular_points(), dtype=float)
    sp = sp[(sp > a) & (sp < b)]
    if sp.size:
        off = SINGULAR_OFFSET * scale
        pts += [sp - off, sp + off]
    x = np.unique(np.clip(np.concatenate(pts), a, b))
    return x


def _sampled_var(values: np.ndarray) -> float:
    return float(np.sum(np.abs(np.diff(values))))


def var_log_D_estimate(f, interval=(0.0, 1.0), grid=None) -> tuple[float, float]:
    """(var(log Df; [a, b]), error proxy).

    PL maps: exact jump sum, error 0.  Möbius flows: the log-derivative is
    monotone, so the variation is the difference of the end values.
    Otherwise the variation of the sampled log-derivative on the grid
    (with singular points bracketed); the error proxy is the change against
    the grid with every other node removed.
    """
    a, b = float(interval[0]), float(interval[1])
    if not 0 <= a <= b <= 1:
        raise DiffeoError("interval must lie in [0, 1]")
    if isinstance(f, (CircleLift, LiftComposition)):
        return _circle_var(f, grid)
    if isinstance(f, PLMap):
        return f.jump_sum(a, b), 0.0
    if isinstance(f, MobiusFlow):
        v = f._log_deriv(np.array([a, b]))
        return float(abs(v[1] - v[0])), 0.0
    if a == b:
        return 0.0, 0.0
    if a == 0.0 and b == 1.0 and grid is None:
        # each half sampled from its own end, so both ends are resolved deeply
        # the halves stop just short of 1/2 and are joined by one step, so a
        # kink sitting exactly at 1/2 is counted once
        left, lv = _half_var(f)
        right, rv = _half_var(f.reflected())
        return left[0] + right[0] + abs(lv - rv), left[1] + right[1]
    return _var_on(f, a, b, grid)


DEEP_POINTS = np.geomspace(1e-300, 1e-24, 160)


def _half_var(f):
    """Variation on [0, 1/2) and the last sampled value."""
    x = _sample_points(f, 0.0, 0.5, None)
    x[-1] = 0.5 - SINGULAR_OFFSET
    # deep points whose orbit leaves the float range are dropped
    with np.errstate(all="ignore"):
        ok = np.isfinite(f._log_deriv(DEEP_POINTS))
    x = np.unique(np.concatenate([DEEP_POINTS[ok], x]))
    last = float(f._log_deriv(x[-1:])[0])
    return _var_on(f, 0.0, 0.5, x, presampled=True), last


def _var_on(f, a, b, grid, presampled: bool = False):
    x = grid if presampled else _sample_points(f, a, b, grid)
    vals = f._log_deriv(x)
    if not np.all(np.isfinite(vals)):
        raise DiffeoError("derivative <= 0 detected")
    fine = _sampled_var(vals)
    keep = np.ones(x.size, bool)
    keep[1:-1:2] = False
    # keep the bracketing points of singularities in the coarse pass
    sp = f.singular_points()
    if sp.size:
        near = np.min(np.abs(x[:, None] - sp[None, :]), axis=1) < 1e-9
        keep |= near
    coarse = _sampled_var(vals[keep])
    return fine, abs(fine - coarse)


def var_log_D(f, interval=(0.0, 1.0), grid=None) -> float:
    return var_log_D_estimate(f, interval, grid)[0]


def _circle_var(F, grid):
    """Variation over one period, with the closure jump at 0 = 1."""
    if isinstance(F, CircleLift) and isinstance(F.base, PLMap):
        base = F.base
        v = base.jump_sum(0, 1)
        v += abs(float(base._logsl[0] - base._logsl[-1]))
        return v, 0.0
    grid = standard_grid() if grid is None else np.asarray(grid, dtype=float)
    sp = F.singular_points()
    x = np.unique(np.concatenate([grid, sp - SINGULAR_OFFSET, sp + SINGULAR_OFFSET]))
    x = x[(x >= 0) & (x <= 1)]
    vals = F._log_deriv(x)
    closed = np.concatenate([vals, vals[:1]])
    fine = _sampled_var(closed)
    coarse = _sampled_var(np.concatenate([vals[::2], vals[:1]]))
    return fine, abs(fine - coarse)


# -- commutation and sign ------------------------------------------------------

def commutation_defect(f, g, grid=None) -> float:
    """sup |f(g(x)) - g(f(x))| over a test grid (exact for exact PL maps)."""
    if isinstance(f, PLMap) and isinstance(g, PLMap) and f.exact and g.exact:
        fg, gf = pl_compose(f, g), pl_compose(g, f)
        if fg == gf:
            return 0.0
        pts = sorted(set(fg.breakpoints) | set(gf.breakpoints))
        return float(max(abs(fg.value_at(p) - gf.value_at(p)) for p in pts))
    if grid is None:
        grid = np.linspace(0.0, 1.0, 2049)
    x = np.asarray(grid, dtype=float)
    return float(np.max(np.abs(f._eval(g._eval(x)) - g._eval(f._eval(x)))))


def delta_sign(f, grid=None) -> int:
    """+1 if f(x) > x on (0, 1), -1 if f(x) < x, 0 if a fixed point is seen."""
    if isinstance(f, PLMap) and f.exact:
        return is_delta_class_pl(f)
    if isinstance(f, MobiusFlow):
        return int(np.sign(f.lam))
    if isinstance(f, FlowMap):
        q0 = float(np.polynomial.polynomial.polyval(0.5, f._q))
        return int(np.sign(q0 * f.time))
    x = standard_grid() if grid is None else np.asarray(grid, dtype=float)
    x = x[(x > 0) & (x < 1)]
    d = f._eval(x) - x
    # near 1 compare in the reflected coordinate for accuracy
    hi = x > 0.5
    if np.any(hi):
        u = 1.0 - x[hi]
        r = f.reflected()
        d[hi] = u - r._eval(u)
    # exact ties very close to an end are rounding (parabolic ends)
    tie = (d == 0) & (np.minimum(x, 1 - x) < 1e-6)
    d = d[~tie]
    if d.size and np.all(d > 0):
        return 1
    if d.size and np.all(d < 0):
        return -1
    return 0
