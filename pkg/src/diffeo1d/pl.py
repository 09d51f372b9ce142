"""Piecewise-affine homeomorphisms of [0, 1].

Breakpoints and slopes are either all ``Fraction`` (exact mode) or all
floats.  Exact maps compose, invert and iterate without rounding.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from fractions import Fraction
from numbers import Rational

import numpy as np

from ._base import (BreakpointOverflow, Diffeo1D, DiffeoError, Germ,
                    affine_germ)

BREAKPOINT_CAP = 10**6
_FLOAT_MERGE = 1e-13


def _to_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, Rational)):
        return Fraction(v)
    if isinstance(v, str):
        return Fraction(v.strip())
    raise TypeError


def _log_ratio(p, q) -> float:
    """log(p/q) for positive rationals or floats, safe for huge ints."""
    if isinstance(p, Fraction) and isinstance(q, Fraction):
        r = p / q
        return math.log(r.numerator) - math.log(r.denominator)
    return math.log(float(p)) - math.log(float(q))


class PLMap(Diffeo1D):
    """Piecewise-affine homeomorphism given by breakpoints and slopes."""

    def __init__(self, breakpoints, slopes, check: bool = True):
        bps = list(breakpoints)
        sls = list(slopes)
        try:
            bps = [_to_fraction(b) for b in bps]
            sls = [_to_fraction(s) for s in sls]
            exact = True
        except TypeError:
            bps = [float(b) for b in bps]
            sls = [float(s) for s in sls]
            exact = False
        self.exact = exact
        self.breakpoints = tuple(bps)
        self.slopes = tuple(sls)
        if check:
            self._validate()
        vals = [bps[0] * 0]
        for i, s in enumerate(sls):
            vals.append(vals[-1] + s * (bps[i + 1] - bps[i]))
        if exact:
            vals[-1] = Fraction(1)
        else:
            vals[-1] = 1.0
        self.values = tuple(vals)
        self._bp_f = np.array([float(b) for b in bps])
        self._val_f = np.array([float(v) for v in vals])
        self._sl_f = np.array([float(s) for s in sls])
        self._logsl = np.array([_log_ratio(s, s * 0 + 1) for s in sls])

    def _validate(self):
        bps, sls = self.breakpoints, self.slopes
        if len(bps) != len(sls) + 1 or len(sls) < 1:
            raise DiffeoError("need len(breakpoints) == len(slopes) + 1")
        if bps[0] != 0 or bps[-1] != 1:
            raise DiffeoError("breakpoints must start at 0 and end at 1")
        for a, b in zip(bps, bps[1:]):
            if not b > a:
                raise DiffeoError("breakpoints must be strictly increasing")
        for s in sls:
            if not s > 0:
                raise DiffeoError("slopes must be positive")
        total = sum(s * (b - a) for s, a, b in zip(sls, bps, bps[1:]))
        if self.exact:
            if total != 1:
                raise DiffeoError(f"pieces cover [0, {total}], not [0, 1]")
        elif abs(total - 1) > 1e-9:
            raise DiffeoError(f"pieces cover [0, {total}], not [0, 1]")

    # -- constructors ------------------------------------------------------
    @classmethod
    def identity(cls) -> "PLMap":
        return cls([0, 1], [1])

    @classmethod
    def from_values(cls, breakpoints, values, check: bool = True) -> "PLMap":
        """Build from breakpoints and the images of the breakpoints."""
        bps = list(breakpoints)
        vals = list(values)
        slopes = [(vals[i + 1] - vals[i]) / (bps[i + 1] - bps[i])
                  for i in range(len(bps) - 1)]
        return cls(bps, slopes, check=check)

    @property
    def pieces(self) -> int:
        return len(self.slopes)

    def is_identity(self) -> bool:
        return self.pieces == 1 and self.slopes[0] == 1

    # -- exact evaluation -----------------------------------------------------
    def _piece(self, x, right: bool = True) -> int:
        """Index of the piece containing x (right piece at breakpoints)."""
        i = bisect_right(self.breakpoints, x) - 1
        if not right and i > 0 and self.breakpoints[i] == x:
            i -= 1
        return min(max(i, 0), self.pieces - 1)

    def value_at(self, x):
        """Exact value at a rational point (exact maps) or float value."""
        if self.exact:
            x = _to_fraction(x)
        if x < 0 or x > 1:
            raise DiffeoError("point outside [0, 1]")
        i = self._piece(x)
        return self.values[i] + self.slopes[i] * (x - self.breakpoints[i])

    def slope_at(self, x, right: bool = True):
        return self.slopes[self._piece(x, right)]

    def inverse_value_at(self, y):
        if self.exact:
            y = _to_fraction(y)
        i = bisect_right(self.values, y) - 1
        i = min(max(i, 0), self.pieces - 1)
        return self.breakpoints[i] + (y - self.values[i]) / self.slopes[i]

    # -- float evaluation -----------------------------------------------------
    def _eval(self, x):
        return np.interp(x, self._bp_f, self._val_f)

    def _index(self, x):
        i = np.searchsorted(self._bp_f, x, side="right") - 1
        return np.clip(i, 0, self.pieces - 1)

    def _deriv(self, x):
        return self._sl_f[self._index(x)]

    def _log_deriv(self, x):
        return self._logsl[self._index(x)]

    def _affine_deriv(self, x):
        return np.zeros_like(x)

    # -- structure ------------------------------------------------------------
    def inverse(self) -> "PLMap":
        one = self.slopes[0] * 0 + 1
        return PLMap(self.values, [one / s for s in self.slopes], check=False)

    def reflected(self) -> "PLMap":
        one = self.breakpoints[-1]
        bps = [one - b for b in reversed(self.breakpoints)]
        return PLMap(bps, list(reversed(self.slopes)), check=False)

    def singular_points(self) -> np.ndarray:
        return self._bp_f[1:-1].copy()

    def germ(self, side: str) -> Germ | None:
        if side == "left":
            return affine_germ(float(self.slopes[0]), float(self.breakpoints[1]))
        return affine_germ(float(self.slopes[-1]), 1 - float(self.breakpoints[-2]))

    def log_multipliers(self):
        return float(self._logsl[0]), float(self._logsl[-1])

    def jump_sum(self, a=0, b=1, closed: bool = False) -> float:
        """Sum of |log(s_{i+1}/s_i)| over breakpoints in (a, b) ([a, b] if
        ``closed``)."""
        total = 0.0
        for i in range(1, self.pieces):
            p = self.breakpoints[i]
            inside = (a <= p <= b) if closed else (a < p < b)
            if inside:
                total += abs(_log_ratio(self.slopes[i], self.slopes[i - 1]))
        return total

    def to_spec(self) -> dict:
        if self.exact:
            return {"type": "pl",
                    "breakpoints": [str(b) for b in self.breakpoints],
                    "slopes": [str(s) for s in self.slopes]}
        return {"type": "pl",
                "breakpoints": [float(b) for b in self.breakpoints],
                "slopes": [float(s) for s in self.slopes]}

    def to_float(self) -> "PLMap":
        if not self.exact:
            return self
        return PLMap(self._bp_f.tolist(), self._sl_f.tolist(), check=False)

    def __eq__(self, other):
        return (isinstance(other, PLMap) and self.breakpoints == other.breakpoints
                and self.slopes == other.slopes)

    def __hash__(self):
        return hash((self.breakpoints, self.slopes))

    def __repr__(self):
        if self.pieces <= 6:
            return (f"PLMap(breakpoints={[str(b) for b in self.breakpoints]}, "
                    f"slopes={[str(s) for s in self.slopes]})")
        return f"PLMap(<{self.pieces} pieces, exact={self.exact}>)"


def _merge(bps, slopes, exact: bool):
    out_b = [bps[0]]
    out_s = []
    for i, s in enumerate(slopes):
        if out_s:
            same = (s == out_s[-1]) if exact else \
                abs(s - out_s[-1]) <= _FLOAT_MERGE * max(s, out_s[-1])
            if same:
                out_b[-1] = bps[i + 1]
                continue
        out_s.append(s)
        out_b.append(bps[i + 1])
    return out_b, out_s


def pl_compose(f: PLMap, g: PLMap, cap: int = BREAKPOINT_CAP) -> PLMap:
    """f o g for PL maps (exact when both are exact)."""
    if g.is_identity():
        return f
    if f.is_identity():
        return g
    if f.exact and g.exact:
        pts = set(g.breakpoints)
        pts.update(g.inverse_value_at(b) for b in f.breakpoints[1:-1])
        pts = sorted(pts)
        if len(pts) - 1 > cap:
            raise BreakpointOverflow(len(pts) - 1, cap)
        slopes = []
        for a, b in zip(pts, pts[1:]):
            m = (a + b) / 2
            slopes.append(g.slope_at(m) * f.slope_at(g.value_at(m)))
        bps, sls = _merge(pts, slopes, True)
        return PLMap(bps, sls, check=False)
    gf, ff = g.to_float(), f.to_float()
    pts = np.concatenate([gf._bp_f, gf.inverse()._eval(ff._bp_f[1:-1])])
    pts = np.unique(np.clip(pts, 0.0, 1.0))
    # drop slivers produced by rounding
    keep = np.concatenate([[True], np.diff(pts) > 1e-15])
    pts = pts[keep]
    pts[-1] = 1.0
    if len(pts) - 1 > cap:
        raise BreakpointOverflow(len(pts) - 1, cap)
    mids = 0.5 * (pts[:-1] + pts[1:])
    slopes = gf._deriv(mids) * ff._deriv(gf._eval(mids))
    # renormalize so the pieces cover [0, 1] exactly
    slopes = slopes / np.sum(slopes * np.diff(pts))
    bps, sls = _merge(pts.tolist(), slopes.tolist(), False)
    return PLMap(bps, sls, check=False)


def pl_iterate(f: PLMap, n: int, cap: int = BREAKPOINT_CAP) -> PLMap:
    if n < 0:
        return pl_iterate(f.inverse(), -n, cap)
    result = PLMap.identity() if f.exact else PLMap([0.0, 1.0], [1.0])
    power = f
    while n:
        if n & 1:
            result = pl_compose(result, power, cap)
        n >>= 1
        if n:
            power = pl_compose(power, power, cap)
    return result


def is_delta_class_pl(f: PLMap) -> int:
    """+1 if f(x) > x on (0,1), -1 if f(x) < x, 0 otherwise (exact check)."""
    signs = set()
    for b, v in zip(f.breakpoints, f.values):
        if 0 < b < 1:
            signs.add((v > b) - (v < b))
    # on each piece f(x) - x is affine; its sign on the open piece is
    # determined by the endpoint values together with the end slopes
    signs.add((f.slopes[0] > 1) - (f.slopes[0] < 1))
    signs.add((f.slopes[-1] < 1) - (f.slopes[-1] > 1))
    if signs == {1}:
        return 1
    if signs == {-1}:
        return -1
    return 0
