"""Monotone sample-table maps and construction from a log-derivative."""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicHermiteSpline, CubicSpline, PchipInterpolator

from ._base import Diffeo1D, DiffeoError, affine_germ
from .roots import newton_polish

DEFAULT_CELLS = 4096
DEFAULT_LEVELS = 64


@lru_cache(maxsize=8)
def _standard_grid(cells: int, levels: int) -> np.ndarray:
    mid = np.linspace(0.0, 1.0, cells + 1)
    geo = (1.0 / cells) * 2.0 ** -np.arange(1, levels + 1)
    right = 1.0 - geo
    right = right[right < 1.0]
    pts = np.unique(np.concatenate([mid, geo, right]))
    pts.setflags(write=False)
    return pts


def standard_grid(cells: int = DEFAULT_CELLS, levels: int = DEFAULT_LEVELS) -> np.ndarray:
    """Uniform grid with `cells` cells plus geometric refinement (ratio 1/2)
    toward both endpoints."""
    return _standard_grid(int(cells), int(levels))


def merge_nodes(grid, extra, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    extra = np.asarray(extra, dtype=float).ravel()
    extra = extra[(extra > lo) & (extra < hi)]
    return np.unique(np.concatenate([np.asarray(grid, dtype=float), extra]))


class GridMap(Diffeo1D):
    """Monotone piecewise-cubic interpolant of a sample table.

    With ``dy`` the interpolant is the cubic Hermite spline through the
    derivative samples, otherwise PCHIP.  ``log_deriv_fn`` (optional)
    supplies the exact log-derivative of the represented map; it is then
    used for Df and log Df in place of the spline derivative.
    ``affine_ends = (s0, z0, s1, z1)`` declares g(x) = s0 x on [0, z0] and
    1 - g(x) = s1 (1 - x) on [1 - z1, 1]; either pair may be None.
    """

    def __init__(self, x, y, dy=None, log_deriv_fn=None, affine_fn=None,
                 affine_ends=None, singular=None, check: bool = True):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float).copy()
        if check:
            if x.ndim != 1 or x.shape != y.shape or x.size < 2:
                raise DiffeoError("sample table must be two 1-D arrays of equal size")
            if not np.all(np.isfinite(y)):
                raise DiffeoError("non-finite samples")
            if x[0] != 0.0 or x[-1] != 1.0:
                raise DiffeoError("sample table must start at 0 and end at 1")
            if np.any(np.diff(x) <= 0):
                raise DiffeoError("sample abscissae must be strictly increasing")
            if abs(y[0]) > 1e-12 or abs(y[-1] - 1) > 1e-12:
                raise DiffeoError("sample table must fix 0 and 1")
            # ties are tolerated only where rounding near 1 merges values
            if np.any(np.diff(y) < 0) or y[-1] <= y[0]:
                raise DiffeoError("non-invertible sample table (values not increasing)")
        y[0], y[-1] = 0.0, 1.0
        self.x, self.y = x, y
        if dy is not None:
            dy = np.asarray(dy, dtype=float)
            if check and np.any(~(dy > 0)):
                raise DiffeoError("derivative samples must be positive")
            self.dy = dy
            self._spl = CubicHermiteSpline(x, y, dy)
        else:
            self._spl = PchipInterpolator(x, y)
            self.dy = self._spl(x, 1)
        self._d1 = self._spl.derivative()
        self._d2 = self._spl.derivative(2)
        self.log_deriv_fn = log_deriv_fn
        self.affine_fn = affine_fn
        self.affine_ends = tuple(affine_ends) if affine_ends is not None else (None,) * 4
        self._singular = (np.empty(0) if singular is None
                          else np.unique(np.asarray(singular, dtype=float)))
        if check:
            wide = np.diff(x) > 1e-9
            mids = 0.5 * (x[:-1] + x[1:])[wide]
            if np.any(self._d1(mids) <= 0):
                raise DiffeoError("interpolant derivative not positive at cell midpoints")

    # -- affine ends ----------------------------------------------------------
    def _zones(self, x):
        s0, z0, s1, z1 = self.affine_ends
        left = (x <= z0) if s0 is not None else np.zeros(x.shape, bool)
        right = (x >= 1 - z1) if s1 is not None else np.zeros(x.shape, bool)
        return left, right

    def _eval(self, x):
        out = np.clip(self._spl(x), 0.0, 1.0)
        left, right = self._zones(x)
        s0, _, s1, _ = self.affine_ends
        if np.any(left):
            out[left] = s0 * x[left]
        if np.any(right):
            out[right] = 1 - s1 * (1 - x[right])
        return out

    def _log_deriv(self, x):
        left, right = self._zones(x)
        s0, _, s1, _ = self.affine_ends
        if self.log_deriv_fn is not None:
            out = np.asarray(self.log_deriv_fn(x), dtype=float).copy()
        else:
            inner = ~(left | right)
            d = np.ones_like(x)
            d[inner] = self._d1(x[inner])
            if np.any(~(d > 0)):
                raise DiffeoError("derivative <= 0 detected")
            out = np.log(d)
        if np.any(left):
            out[left] = np.log(s0)
        if np.any(right):
            out[right] = np.log(s1)
        return out

    def _affine_deriv(self, x):
        if self.affine_fn is not None:
            out = np.asarray(self.affine_fn(x), dtype=float).copy()
        else:
            out = self._d2(x) / self._d1(x)
        left, right = self._zones(x)
        out[left | right] = 0.0
        return out

    # -- structure -------------------------------------------------------------
    def inverse(self):
        return GridInverse(self)

    def reflected(self):
        """u -> 1 - g(1 - u) as its own table, so small u keeps relative
        accuracy (nodes that merge after reflection are dropped)."""
        s0, z0, s1, z1 = self.affine_ends
        x = 1.0 - self.x[::-1]
        keep = np.concatenate([[True], np.diff(x) > 0]) & (x < 1.0)
        keep[-1] = True
        fn, afn = self.log_deriv_fn, self.affine_fn
        return GridMap(
            x[keep], (1.0 - self.y[::-1])[keep], self.dy[::-1][keep],
            log_deriv_fn=None if fn is None else (lambda u: fn(1.0 - u)),
            affine_fn=None if afn is None else (lambda u: -afn(1.0 - u)),
            affine_ends=(s1, z1, s0, z0), singular=1.0 - self._singular, check=False)

    def singular_points(self):
        return self._singular.copy()

    def germ(self, side):
        s0, z0, s1, z1 = self.affine_ends
        if side == "left" and s0 is not None:
            return affine_germ(s0, z0)
        if side == "right" and s1 is not None:
            return affine_germ(s1, z1)
        return None

    def log_multipliers(self):
        v = self._log_deriv(np.array([0.0, 1.0]))
        return float(v[0]), float(v[1])

    def is_identity(self):
        return bool(np.all(self.y == self.x) and np.all(self.dy == 1.0))

    def to_spec(self):
        return {"type": "grid", "x": self.x.tolist(), "y": self.y.tolist(),
                "dy": self.dy.tolist()}

    def __repr__(self):
        return f"GridMap(<{self.x.size} nodes>)"


class GridInverse(Diffeo1D):
    """Exact inverse of a GridMap: cell-local root of the cubic."""

    def __init__(self, g: GridMap):
        self.g = g

    def _eval(self, y):
        g = self.g
        out = np.empty_like(y)
        s0, z0, s1, z1 = g.affine_ends
        left = (y <= s0 * z0) if s0 is not None else np.zeros(y.shape, bool)
        right = (y >= 1 - s1 * z1) if s1 is not None else np.zeros(y.shape, bool)
        if np.any(left):
            out[left] = y[left] / s0
        if np.any(right):
            out[right] = 1 - (1 - y[right]) / s1
        rest = ~(left | right)
        if np.any(rest):
            t = np.clip(y[rest], 0.0, 1.0)
            i = np.clip(np.searchsorted(g.y, t, side="right") - 1, 0, g.x.size - 2)
            lo, hi = g.x[i], g.x[i + 1]
            lo, hi = _cell_bisect(g._spl, t, lo, hi)
            x = 0.5 * (lo + hi)
            x = newton_polish(g._spl, g._d1, t, x, lo, hi)
            # deep in the first cell the bisection width is too coarse; the
            # cubic there has no constant term, so Newton from t / Dg(0)
            # keeps relative accuracy
            deep = (i == 0) & (t < 1e-3 * g.y[1]) & (t > 0)
            if np.any(deep):
                td = t[deep]
                xd = td / g.dy[0]
                for _ in range(4):
                    xd = xd - (g._spl(xd) - td) / g._d1(xd)
                x[deep] = xd
            exact = (t == 0) | (t == 1)
            out[rest] = np.where(exact, t, x)
        return out

    def _log_deriv(self, y):
        return -self.g._log_deriv(self._eval(y))

    def _affine_deriv(self, y):
        x = self._eval(y)
        return -self.g._affine_deriv(x) / self.g._deriv(x)

    def inverse(self):
        return self.g

    def reflected(self):
        return GridInverse(self.g.reflected())

    def singular_points(self):
        sp = self.g.singular_points()
        return self.g._eval(sp) if sp.size else sp

    def germ(self, side):
        s0, z0, s1, z1 = self.g.affine_ends
        if side == "left" and s0 is not None:
            return affine_germ(1 / s0, s0 * z0)
        if side == "right" and s1 is not None:
            return affine_germ(1 / s1, s1 * z1)
        return None

    def to_spec(self):
        return {"type": "inverse", "map": self.g.to_spec()}


def _cell_bisect(fun, target, lo, hi, iters: int = 60):
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = fun(mid) < target
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
        if np.all(hi - lo <= 4e-16 * np.maximum(hi, 1e-300)):
            break
    return lo, hi


# Gauss-Legendre nodes on [0, 1]
_GL_T, _GL_W = np.polynomial.legendre.leggauss(6)
_GL_T = 0.5 * (_GL_T + 1.0)
_GL_W = 0.5 * _GL_W


def cell_integrals(fun, nodes) -> np.ndarray:
    """Integral of ``fun`` over each cell [nodes[i], nodes[i+1]] (6-point GL)."""
    a, b = nodes[:-1], nodes[1:]
    h = b - a
    pts = a[:, None] + h[:, None] * _GL_T[None, :]
    vals = np.asarray(fun(pts.ravel()), dtype=float).reshape(pts.shape)
    return h * (vals @ _GL_W)


def _cumulate(cells, total):
    """Normalized cumulative sums, summed from the nearer end so values
    close to 1 keep their accuracy."""
    left = np.concatenate([[0.0], np.cumsum(cells)]) / total
    right = 1.0 - np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]]) / total
    half = left > 0.5
    return np.where(half, right, left)


def _folding_cells(x, y, dy) -> np.ndarray:
    h = np.diff(x)
    wide = h > 1e-9
    if not np.any(wide):
        return wide
    spl = CubicHermiteSpline(x, y, dy)
    d1 = spl.derivative()
    bad = np.zeros(h.shape, bool)
    for w in (0.25, 0.5, 0.75):
        bad |= d1(x[:-1] + w * h) <= 0
    return bad & wide


def build_from_log_derivative(u, grid=None, singular=(), affine_ends=None,
                              affine_zones=None) -> GridMap:
    """The diffeomorphism g with g(0) = 0 and Dg = e^u / int_0^1 e^u.

    ``u`` is either a callable (integrated by Gauss-Legendre per cell, with
    ``singular`` points added as nodes; the returned map carries the exact
    log-derivative) or an array of samples on ``grid``.
    ``affine_zones = (z0, z1)`` declares u constant on [0, z0] and
    [1 - z1, 1] (either may be None); the slopes there are then taken from
    the normalized log-derivative (callable ``u`` only).
    """
    if grid is None:
        grid = standard_grid()
    grid = np.asarray(grid, dtype=float)
    if callable(u):
        nodes = merge_nodes(grid, singular)
        un = np.asarray(u(nodes), dtype=float)
        if not np.all(np.isfinite(un)):
            raise DiffeoError("non-finite log-derivative samples")
        shift = float(np.max(un))

        def e_u(t):
            return np.exp(np.asarray(u(t), dtype=float) - shift)

        cells = cell_integrals(e_u, nodes)
        for sweep in range(40):
            if not np.all(np.isfinite(cells)) or not np.all(np.isfinite(un)):
                raise DiffeoError("non-finite log-derivative samples")
            total = float(np.sum(cells))
            cum = _cumulate(cells, total)
            dy = np.exp(un - shift) / total
            # split cells where the cubic Hermite interpolant would fold back;
            # only the new cells are re-integrated
            bad = _folding_cells(nodes, cum, dy)
            if not np.any(bad) or sweep == 39:
                break
            idx = np.flatnonzero(bad)
            mids = 0.5 * (nodes[idx] + nodes[idx + 1])
            left = cell_integrals(e_u, np.stack([nodes[idx], mids]).T.ravel())[::2]
            right = cell_integrals(e_u, np.stack([mids, nodes[idx + 1]]).T.ravel())[::2]
            nodes = np.insert(nodes, idx + 1, mids)
            un = np.insert(un, idx + 1, np.asarray(u(mids), dtype=float))
            cells = np.insert(cells, idx + 1, right)
            cells[idx + np.arange(idx.size)] = left
        const = shift + np.log(total)

        def log_deriv_fn(t, _u=u, _c=const):
            return np.asarray(_u(t), dtype=float) - _c

        if affine_zones is not None:
            z0, z1 = affine_zones
            ends = np.exp(log_deriv_fn(np.array([0.0, 1.0])))
            affine_ends = (None if z0 is None else float(ends[0]), z0,
                           None if z1 is None else float(ends[1]), z1)

        return GridMap(nodes, cum, dy, log_deriv_fn=log_deriv_fn,
                       affine_ends=affine_ends, singular=singular)
    un = np.asarray(u, dtype=float)
    if un.shape != grid.shape:
        raise DiffeoError("samples must match the grid")
    if not np.all(np.isfinite(un)):
        raise DiffeoError("non-finite log-derivative samples")
    # shape-preserving interpolation keeps e^u positive between samples
    interp = PchipInterpolator(grid, un)
    return build_from_log_derivative(interp, grid=grid, singular=singular,
                                     affine_ends=affine_ends)


def identity_grid_map(grid=None) -> GridMap:
    grid = standard_grid() if grid is None else np.asarray(grid, dtype=float)
    return GridMap(grid, grid, np.ones_like(grid))
