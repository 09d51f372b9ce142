"""Deformation paths of commuting actions and their validation.

Every path is a sampled family t -> (generator tuple), t in [0, 1], built
from one of the conjugation or homotopy procedures below, together with the
per-sample variation of log D of each generator and a declared budget.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._base import DiffeoError, affine_germ
from .analytic import Composition, PowerGerm, ReflectedMap
from .circle import CircleLift, LiftComposition, rotation_number, translation_amount
from .core import DEEP_POINTS, commutation_defect, iterate, var_log_D_estimate
from .grid import (GridMap, build_from_log_derivative, identity_grid_map, merge_nodes,
                   standard_grid)
from .pl import PLMap, pl_compose

COMMUTE_TOL = 1e-6
PATH_COMMUTE_TOL = 1e-5
ENDPOINT_TOL = 1e-8
DEFAULT_SAMPLES = 33
DEFAULT_FACTOR = 2.0


# -- actions --------------------------------------------------------------------

def _domain_of(f) -> str:
    return getattr(f, "domain", "interval")


@dataclass
class ActionTuple:
    """Commuting generators sharing one domain ("interval" or "circle")."""

    generators: tuple
    domain: str = "interval"

    def __post_init__(self):
        self.generators = tuple(self.generators)
        if not self.generators:
            raise DiffeoError("an action needs at least one generator")
        tags = {_domain_of(g) for g in self.generators}
        if len(tags) > 1:
            raise DiffeoError("generators mix interval and circle maps")
        self.domain = tags.pop()

    @property
    def d(self) -> int:
        return len(self.generators)

    def defect(self) -> float:
        """max pairwise commutation defect."""
        worst = 0.0
        for f, g in itertools.combinations(self.generators, 2):
            worst = max(worst, commutation_defect(f, g))
        return worst

    def validate(self, tol: float = COMMUTE_TOL) -> float:
        dft = self.defect()
        if dft >= tol:
            raise DiffeoError(f"generators do not commute (defect {dft:.3g} >= {tol:g})")
        return dft


def as_action(obj, check: bool = True) -> ActionTuple:
    if isinstance(obj, ActionTuple):
        act = obj
    elif isinstance(obj, (list, tuple)):
        act = ActionTuple(tuple(obj))
    else:
        act = ActionTuple((obj,))
    if check:
        act.validate()
    return act


def _var(f) -> float:
    return var_log_D_estimate(f)[0]


def sup_gap(f, g, samples: int = 4097) -> float:
    """sup |f - g| on a uniform grid of [0, 1] (one period for lifts)."""
    x = np.linspace(0.0, 1.0, samples)
    return float(np.max(np.abs(f._eval(x) - g._eval(x))))


# -- box sums ---------------------------------------------------------------------

def _box_sums(gens, n: int, x, acc=None):
    """Sums over the box {f_1^m_1 ... f_d^m_d : 0 <= m_i < n} of
    (F^m(x), log DF^m(x), DF^m(x)), accumulated depth first."""
    if acc is None:
        acc = np.zeros_like(x)
    if not gens:
        return x.copy(), acc.copy(), np.exp(acc)
    g, rest = gens[0], gens[1:]
    sp = np.zeros_like(x)
    sl = np.zeros_like(x)
    sd = np.zeros_like(x)
    y, a = x, acc
    for k in range(n):
        p, l, dd = _box_sums(rest, n, y, a)
        sp += p
        sl += l
        sd += dd
        if k < n - 1:
            a = a + g._log_deriv(y)
            y = g._eval(y)
    return sp, sl, sd


def _box_preimages(gens, n: int, pts) -> np.ndarray:
    """All F^{-m}(pts) over the box, restricted to (0, 1)."""
    pts = np.asarray(pts, dtype=float)
    if pts.size == 0 or n <= 1:
        return pts
    inv = [g.inverse() for g in gens]
    found = [pts]
    layer = [pts]
    for h in inv:
        nxt = []
        for p in layer:
            y = p
            for _ in range(n - 1):
                y = h._eval(y)
                nxt.append(y)
        layer = layer + nxt
        found.extend(nxt)
    out = np.unique(np.concatenate(found))
    return out[(out > 0) & (out < 1)]


def _affine_end(f, side: str):
    g = f.germ(side)
    if g is None or g.kind != "affine":
        return None
    return math.exp(float(g.field(np.array([1.0]))[0])), float(g.zone)


def _conjugated(g, f):
    """g o f o g^{-1}, carrying affine germs when both ends allow it."""
    germs = {}
    for side in ("left", "right"):
        ef, eg = _affine_end(f, side), _affine_end(g, side)
        if ef is None or eg is None:
            continue
        (s, zf), (c, zg) = ef, eg
        zone = c * min(zg, zf, zg / s)
        germs[side] = affine_germ(s, zone)
    return Composition([g, f, g.inverse()], germs)


# -- interval box averaging ---------------------------------------------------------

@dataclass
class BoxAverage:
    """log Dg_n = (1/n^d) sum over the box of log DF^m, up to a constant."""

    gens: tuple
    n: int
    singular: np.ndarray
    zones: tuple

    def u(self, x):
        x = np.asarray(x, dtype=float)
        if self.n == 1:
            return np.zeros_like(x)
        _, sl, _ = _box_sums(self.gens, self.n, x)
        return sl / self.n ** len(self.gens)


def _box_zone(gens, n: int, side: str):
    """Distance to the endpoint on which every box element is affine."""
    ends = [_affine_end(g, side) for g in gens]
    if any(e is None for e in ends):
        return None
    # box elements use non-negative powers: only expanding ends push the
    # orbit out of the affine zone
    grow = math.prod(max(s, 1.0) for s, _ in ends)
    z = min(z for _, z in ends)
    return z / grow ** max(n - 2, 0)


def box_average(action, n: int) -> BoxAverage:
    act = as_action(action, check=False)
    if act.domain != "interval":
        raise DiffeoError("box averaging of log-derivatives needs interval maps")
    if n < 1:
        raise DiffeoError("n must be >= 1")
    sing = np.unique(np.concatenate([np.asarray(g.singular_points(), dtype=float)
                                     for g in act.generators] + [np.empty(0)]))
    sing = _box_preimages(act.generators, n, sing)
    zones = (_box_zone(act.generators, n, "left"), _box_zone(act.generators, n, "right"))
    return BoxAverage(act.generators, int(n), sing, zones)


def _build(u: Callable, singular, zones, grid=None) -> GridMap:
    z0, z1 = zones
    az = None if z0 is None and z1 is None else (z0, z1)
    return build_from_log_derivative(u, grid=grid, singular=singular, affine_zones=az)


def box_average_conjugator(action, n: int, grid=None):
    """(g_n, conjugated generators) for commuting interval maps.

    var(log D(g_n f_i g_n^{-1})) equals the average over the remaining box
    directions of log Df_i^n / n, so it is at most var(log Df_i^n)/n.
    """
    act = as_action(action)
    if n == 1:
        return identity_grid_map(grid), act.generators
    box = box_average(act, n)
    g = _build(box.u, box.singular, box.zones, grid)
    return g, tuple(_conjugated(g, f) for f in act.generators)


def geometric_interp(g_a, g_b, s: float, grid=None) -> GridMap:
    """g_s with g_s(0) = 0 and Dg_s proportional to Dg_a^(1-s) Dg_b^s."""
    if not 0.0 <= s <= 1.0:
        raise DiffeoError("s must lie in [0, 1]")
    sing = np.unique(np.concatenate([np.asarray(g_a.singular_points(), dtype=float),
                                     np.asarray(g_b.singular_points(), dtype=float)]))

    def u(x):
        return (1.0 - s) * g_a._log_deriv(x) + s * g_b._log_deriv(x)

    zones = (_common_zone(g_a, g_b, "left"), _common_zone(g_a, g_b, "right"))
    return _build(u, sing, zones, grid)


def _common_zone(a, b, side):
    ea, eb = _affine_end(a, side), _affine_end(b, side)
    if ea is None or eb is None:
        return None
    return min(ea[1], eb[1])


def _interp_box(b0: BoxAverage, b1: BoxAverage, s: float, grid=None) -> GridMap:
    sing = np.unique(np.concatenate([b0.singular, b1.singular]))

    def u(x):
        if s == 0.0:
            return b0.u(x)
        if s == 1.0:
            return b1.u(x)
        return (1.0 - s) * b0.u(x) + s * b1.u(x)

    zones = tuple(None if (p is None or q is None) else min(p, q)
                  for p, q in zip(b0.zones, b1.zones))
    return _build(u, sing, zones, grid)


# -- circle averaging ---------------------------------------------------------------

CIRCLE_NODES = 4097


def _circle_nodes(nodes=None):
    # uniform: lifts have no distinguished points, and phi(x) - phi(0) is
    # only resolved to rounding at the deep nodes of the endpoint grid
    return np.linspace(0.0, 1.0, CIRCLE_NODES) if nodes is None else \
        np.asarray(nodes, dtype=float)


def _circle_phi(lifts, n: int, nodes):
    """Base table (y, dy) and offset of phi_n(x) = mean over the box of F^m(x)."""
    if all(translation_amount(F) is not None for F in lifts):
        shift = sum(translation_amount(F) for F in lifts) * (n - 1) / 2.0
        return nodes.copy(), np.ones_like(nodes), shift
    sp, _, sd = _box_sums(tuple(lifts), n, nodes)
    size = float(n ** len(lifts))
    phi, dphi = sp / size, sd / size
    off = float(phi[0])
    return phi - off, dphi, off


def _phi_lift(y, dy, off, nodes) -> CircleLift:
    if np.array_equal(y, nodes) and np.all(dy == 1.0):
        return CircleLift(PLMap.identity(), off)
    return CircleLift(GridMap(nodes, y, dy), off)


def _lift_conjugate(phi: CircleLift, F):
    if phi.is_translation() and translation_amount(F) is not None:
        return F
    return LiftComposition([phi, F, phi.inverse()])


def circle_average(action, n: int, nodes=None):
    """(phi_n, conjugated lifts) with phi_n the box average of the lifts."""
    act = as_action(action)
    if act.domain != "circle":
        raise DiffeoError("circle averaging needs circle lifts")
    if n < 1:
        raise DiffeoError("n must be >= 1")
    nodes = _circle_nodes(nodes)
    y, dy, off = _circle_phi(act.generators, n, nodes)
    phi = _phi_lift(y, dy, off, nodes)
    return phi, tuple(_lift_conjugate(phi, F) for F in act.generators)


def rotation_gap(G, rho: float, samples: int = 4097) -> float:
    """sup |G(x) - x - rho| over one period."""
    amount = translation_amount(G)
    if amount is not None:
        return abs(amount - rho)
    x = np.linspace(0.0, 1.0, samples)
    return float(np.max(np.abs(G._eval(x) - x - rho)))


def translation_residual(phi: CircleLift, samples: int = 1025) -> float:
    """sup |phi(x + 1) - phi(x) - 1|."""
    x = np.linspace(0.0, 1.0, samples)
    return float(np.max(np.abs(phi._eval(x + 1.0) - phi._eval(x) - 1.0)))


# -- homotopy and multiplier change --------------------------------------------------

def linear_log_homotopy(F, t: float, grid=None):
    """F_t with F_t(0) = 0 and log DF_t = (1 - t) log DF + const."""
    if not 0.0 <= t <= 1.0:
        raise DiffeoError("t must lie in [0, 1]")
    if t == 0.0:
        return F
    if t == 1.0:
        return PLMap.identity()
    if isinstance(F, PLMap):
        widths = np.diff(F._bp_f)
        w = np.exp((1.0 - t) * (F._logsl - np.max(F._logsl)))
        slopes = w / float(np.dot(widths, w))
        return _pl_from_slopes(F._bp_f, slopes)
    zones = []
    for side in ("left", "right"):
        e = _affine_end(F, side)
        zones.append(None if e is None else e[1])
    return _build(lambda x: (1.0 - t) * F._log_deriv(x), F.singular_points(),
                  tuple(zones), grid)


def _pl_from_slopes(bps, slopes) -> PLMap:
    slopes = np.asarray(slopes, dtype=float)
    bps = [float(b) for b in bps]
    # absorb rounding so the pieces end exactly at 1
    widths = np.diff(bps)
    err = 1.0 - float(np.dot(widths, slopes))
    slopes = slopes.copy()
    slopes[-1] += err / widths[-1]
    return PLMap(bps, [float(s) for s in slopes])


class AlphaConjugate(Composition):
    """W o f o W^{-1} with W = x -> eps^(1-alpha) x^alpha near the chosen
    ends (blended to the identity on [eps, 2 eps]); an affine germ with
    multiplier s becomes affine with multiplier s^alpha."""

    def __init__(self, f, alpha: float, eps: tuple):
        self.f, self.alpha, self.eps = f, float(alpha), tuple(eps)
        e0, e1 = eps
        parts = []
        if e0:
            parts.append(PowerGerm(alpha, e0))
        if e1:
            parts.append(ReflectedMap(PowerGerm(alpha, e1)))
        W = parts[0] if len(parts) == 1 else Composition(parts)
        self.W = W
        germs = {}
        self._zones = [None, None]
        for i, (side, e) in enumerate((("left", e0), ("right", e1))):
            if not e:
                continue
            s, zf = _affine_end(f, side)
            xz = min(e, zf, e / s)
            zone = e ** (1 - alpha) * xz ** alpha
            germs[side] = affine_germ(s ** alpha, zone)
            self._zones[i] = (s ** alpha, zone)
        super().__init__([W, f, W.inverse()], germs)

    def _masks(self, x):
        (l0, l1) = self._zones
        left = (x <= l0[1]) if l0 else np.zeros(x.shape, bool)
        right = (x >= 1 - l1[1]) if l1 else np.zeros(x.shape, bool)
        return left, right

    def _eval(self, x):
        left, right = self._masks(x)
        rest = ~(left | right)
        out = np.empty_like(x)
        if np.any(rest):
            out[rest] = super()._eval(x[rest])
        if np.any(left):
            out[left] = self._zones[0][0] * x[left]
        if np.any(right):
            out[right] = 1 - self._zones[1][0] * (1 - x[right])
        return out

    def _log_deriv(self, x):
        left, right = self._masks(x)
        rest = ~(left | right)
        out = np.empty_like(x)
        if np.any(rest):
            out[rest] = super()._log_deriv(x[rest])
        if np.any(left):
            out[left] = math.log(self._zones[0][0])
        if np.any(right):
            out[right] = math.log(self._zones[1][0])
        return out

    def _affine_deriv(self, x):
        left, right = self._masks(x)
        rest = ~(left | right)
        out = np.zeros_like(x)
        if np.any(rest):
            out[rest] = super()._affine_deriv(x[rest])
        return out

    def inverse(self):
        return AlphaConjugate(self.f.inverse(), self.alpha, self.eps)

    def reflected(self):
        return AlphaConjugate(self.f.reflected(), self.alpha, self.eps[::-1])

    def log_multipliers(self):
        a, b = self.f.log_multipliers()
        e0, e1 = self.eps
        return (self.alpha * a if e0 else a), (self.alpha * b if e1 else b)


def _alpha_eps(gens, sides, eps):
    """Per-side cutoff: half the common affine zone unless given."""
    out = []
    for side, want in zip(("left", "right"), sides):
        if not want:
            out.append(None)
            continue
        ends = [_affine_end(g, side) for g in gens]
        if any(e is None for e in ends):
            raise DiffeoError(f"generator is not affine near the {side} end")
        zone = min(z for _, z in ends)
        e = eps if eps is not None else 0.5 * zone
        if 2 * e > zone + 1e-15:
            raise DiffeoError(f"2 eps = {2 * e:g} reaches past the affine zone "
                              f"({zone:g}) at the {side} end")
        out.append(min(e, 0.5))
    return out


def _alpha_sides(gens, side: str):
    if side == "left":
        return (True, False)
    if side == "right":
        return (False, True)
    if side == "both":
        return (True, True)
    # auto: every hyperbolic end with an affine germ
    res = []
    for s in ("left", "right"):
        ends = [_affine_end(g, s) for g in gens]
        res.append(all(e is not None for e in ends)
                   and any(abs(math.log(e[0])) > 0 for e in ends))
    return tuple(res)


def alpha_conjugate(f, alpha: float, eps: float | None = None, side: str = "auto"):
    """Conjugate of f changing its endpoint multipliers Df to Df^alpha."""
    if not 0 < alpha <= 1:
        raise DiffeoError("alpha must lie in (0, 1]")
    if alpha == 1.0:
        return f
    sides = _alpha_sides((f,), side)
    e = _alpha_eps((f,), sides, eps)
    if not any(e):
        raise DiffeoError("no hyperbolic affine end to deform")
    return AlphaConjugate(f, alpha, e)


def alpha_norm_bound(f, beta: float, eps) -> float:
    """Upper bound for var(log D(W f W^{-1})) with W the beta power conjugator.

    Split log DW = P + R with P = (beta - 1) log(x / eps) on the power zone
    and 0 elsewhere; R is constant on the power zone and carries the blend.
    Then log D(W f W^{-1}) o W = R o f - R + log Df + (P o f - P), and
    P o f - P is constant except on one fundamental domain, where it moves
    monotonically by (1 - beta) |log Df(end)|.
    """
    total = _var(f)
    if beta == 1.0:
        return total
    lam, mu = f.log_multipliers()
    for e, m in zip(eps, (lam, mu)):
        if e:
            total += 2.0 * PowerGerm(beta, e).blend_variation() + (1.0 - beta) * abs(m)
    return total


def _alpha_budget(gens, alpha, sides, eps, points: int = 257) -> np.ndarray:
    e = _alpha_eps(gens, sides, eps)
    # the orbit crossing one power zone must not reach the other one
    reach = [0.0 if not x else x for x in e]
    for g in gens:
        for i, side in enumerate(("left", "right")):
            if e[i]:
                s, _ = _affine_end(g, side)
                if max(s, 1.0 / s) * e[i] >= 1.0 - reach[1 - i]:
                    raise DiffeoError("power zones too wide for the norm bound")
    betas = np.linspace(alpha, 1.0, points)
    return np.array([max(alpha_norm_bound(g, float(b), e) for b in betas) for g in gens])


def _alpha_action(gens, alpha, sides, eps):
    if alpha == 1.0:
        return tuple(gens)
    e = _alpha_eps(gens, sides, eps)
    return tuple(AlphaConjugate(g, alpha, e) for g in gens)


# -- flattening -----------------------------------------------------------------------

def flatten(f, grid=None) -> GridMap:
    """Hermite table of f on the grid, keeping exact affine ends."""
    grid = standard_grid() if grid is None else np.asarray(grid, dtype=float)
    sp = np.asarray(f.singular_points(), dtype=float)
    nodes = np.unique(np.concatenate([grid, sp])) if sp.size else grid
    ends = []
    for side in ("left", "right"):
        e = _affine_end(f, side)
        ends.extend([None, None] if e is None else [e[0], e[1]])
    y = f._eval(nodes)
    dy = np.exp(f._log_deriv(nodes))
    return GridMap(nodes, y, dy, affine_ends=tuple(ends), singular=sp)


# -- paths ---------------------------------------------------------------------------

@dataclass
class DeformationPath:
    times: np.ndarray
    actions: list
    var: np.ndarray
    budget: np.ndarray
    tag: str
    source: tuple
    domain: str = "interval"
    details: dict = field(default_factory=dict)
    moduli: np.ndarray | None = None

    @property
    def d(self) -> int:
        return len(self.source)


def _action_var(gens) -> np.ndarray:
    return np.array([_var(g) for g in gens])


def _step_modulus(a, b) -> float:
    """C^{1+bv} distance between consecutive samples: var(log D(b o a^{-1}))
    plus the sup-distance."""
    if isinstance(a, PLMap) and isinstance(b, PLMap):
        c = pl_compose(b, a.inverse())
        v = c.jump_sum(0, 1)
    elif _domain_of(a) == "circle":
        c = LiftComposition([b, a.inverse()])
        v = var_log_D_estimate(c)[0]
    else:
        v = var_log_D_estimate(Composition([b, a.inverse()]))[0]
    return v + sup_gap(a, b)


def _action_modulus(A, B) -> float:
    if all(x is y for x, y in zip(A, B)):
        return 0.0
    return max(_step_modulus(a, b) for a, b in zip(A, B))


def sample_path(builder: Callable, source, tag: str, budget, samples: int = DEFAULT_SAMPLES,
                densify: bool = True, details=None, domain="interval") -> DeformationPath:
    """Sample t -> builder(t) at uniform times, then insert midpoints once
    where the step modulus exceeds twice the median."""
    times = list(np.linspace(0.0, 1.0, samples))
    acts = [tuple(builder(t)) for t in times]
    mods = [_action_modulus(acts[j], acts[j + 1]) for j in range(len(acts) - 1)]
    if densify and len(mods) > 2:
        med = float(np.median(mods))
        if med > 0:
            new_t, new_a, new_m = [times[0]], [acts[0]], []
            for j, m in enumerate(mods):
                if m > 2 * med:
                    tm = 0.5 * (times[j] + times[j + 1])
                    am = tuple(builder(tm))
                    new_t.append(tm)
                    new_a.append(am)
                    new_m += [_action_modulus(acts[j], am), _action_modulus(am, acts[j + 1])]
                else:
                    new_m.append(m)
                new_t.append(times[j + 1])
                new_a.append(acts[j + 1])
            times, acts, mods = new_t, new_a, new_m
    var = np.array([_action_var(a) for a in acts])
    return DeformationPath(times=np.array(times), actions=acts, var=var,
                           budget=np.asarray(budget, dtype=float), tag=tag,
                           source=tuple(source), domain=domain,
                           details=dict(details or {}), moduli=np.array(mods))


def _segments(t: float, k: int):
    """(segment index, local parameter) for t in [0, 1] cut into k equal parts."""
    j = min(int(t * k), k - 1)
    return j, t * k - j


def _budget(gens, factor: float) -> np.ndarray:
    return factor * _action_var(gens)


def _n_position(t: float, n_max: int):
    """The averaging index along t: 1 - 1/nu is linear in t, nu from 1 to n_max,
    and consecutive integers are joined by the interpolation parameter."""
    tp = t * (1.0 - 1.0 / n_max)
    nu = 1.0 / (1.0 - tp)
    n = min(int(math.floor(nu + 1e-12)), n_max - 1) if n_max > 1 else 1
    # s is affine in tp between 1 - 1/n and 1 - 1/(n+1)
    s = (tp - (1.0 - 1.0 / n)) * n * (n + 1)
    return n, min(max(s, 0.0), 1.0)


def circle_average_path(action, n_max: int = 32, samples: int = DEFAULT_SAMPLES,
                        factor: float = DEFAULT_FACTOR, densify: bool = True):
    act = as_action(action)
    if act.domain != "circle":
        raise DiffeoError("circle averaging needs circle lifts")
    nodes = _circle_nodes()
    cache: dict = {}

    def phi(n):
        if n not in cache:
            cache[n] = _circle_phi(act.generators, n, nodes)
        return cache[n]

    def builder(t):
        if t == 0.0:
            return act.generators
        n, s = _n_position(t, n_max)
        y0, d0, o0 = phi(n)
        y1, d1, o1 = phi(n + 1)
        P = _phi_lift((1 - s) * y0 + s * y1, (1 - s) * d0 + s * d1,
                      (1 - s) * o0 + s * o1, nodes)
        return tuple(_lift_conjugate(P, F) for F in act.generators)

    rho = [rotation_number(F) for F in act.generators]
    return sample_path(builder, act.generators, "circle-average",
                       _budget(act.generators, factor), samples, densify,
                       {"rho": rho, "n_max": n_max}, domain="circle")


def box_average_path(action, n_max: int = 32, samples: int = DEFAULT_SAMPLES,
                     factor: float = DEFAULT_FACTOR, densify: bool = True, grid=None):
    act = as_action(action)
    cache: dict = {}

    def box(n):
        if n not in cache:
            cache[n] = box_average(act, n)
        return cache[n]

    def builder(t):
        if t == 0.0:
            return act.generators
        n, s = _n_position(t, n_max)
        g = _interp_box(box(n), box(n + 1), s, grid)
        return tuple(_conjugated(g, f) for f in act.generators)

    return sample_path(builder, act.generators, "box-average",
                       _budget(act.generators, factor), samples, densify,
                       {"n_max": n_max})


def _exponents_over(gens, f, max_power: int, tol: float):
    exps = []
    for g in gens:
        for m in sorted(range(-max_power, max_power + 1), key=abs):
            fm = iterate(f, m)
            if isinstance(g, PLMap) and isinstance(fm, PLMap) and g.exact and fm.exact:
                same = g == fm
            else:
                same = sup_gap(g, fm, 1025) < tol
            if same:
                exps.append(m)
                break
        else:
            return None
    return exps


def root_exponents(action, root=None, max_power: int = 8, tol: float = 1e-9):
    """(root f, exponents m_i) with f_i = f^m_i.  Without an explicit root
    each generator is tried in turn."""
    act = as_action(action)
    candidates = act.generators if root is None else (root,)
    for f in candidates:
        exps = _exponents_over(act.generators, f, max_power, tol)
        if exps is not None:
            return f, exps
    raise DiffeoError("generators are not powers of a common root")


def _powers(F, exps):
    return tuple(iterate(F, m, fallback=True) for m in exps)


def homotopy_path(action, root=None, samples: int = DEFAULT_SAMPLES,
                  factor: float = DEFAULT_FACTOR, densify: bool = True, grid=None):
    """t -> (F_t^m_1, ..., F_t^m_d) for the linear-log homotopy of the root."""
    act = as_action(action)
    f, exps = root_exponents(act, root)

    def builder(t):
        if t == 0.0:
            return act.generators
        return _powers(linear_log_homotopy(f, t, grid), exps)

    return sample_path(builder, act.generators, "linear-log-homotopy",
                       _budget(act.generators, factor), samples, densify,
                       {"exponents": exps})


def alpha_path(action, alpha: float = 0.25, eps: float | None = None,
               samples: int = DEFAULT_SAMPLES, factor: float = DEFAULT_FACTOR,
               densify: bool = True, side: str = "auto"):
    """beta -> W_beta-conjugates for beta from 1 down to alpha."""
    act = as_action(action)
    sides = _alpha_sides(act.generators, side)
    _alpha_eps(act.generators, sides, eps)

    def builder(t):
        return _alpha_action(act.generators, 1.0 - t * (1.0 - alpha), sides, eps)

    # a bare power conjugation has no norm control from averaging, so the
    # declared budget is the triangle bound of alpha_norm_bound
    return sample_path(builder, act.generators, "alpha-conjugation",
                       _alpha_budget(act.generators, alpha, sides, eps), samples, densify,
                       {"alpha": alpha, "sides": sides, "budget": "power-conjugation bound"})


def _average_until(gens, target: float, n_cap: int = 1024, grid=None):
    """Smallest power-of-two n with var(log D(g_n f_i g_n^{-1})) <= target
    for every generator."""
    n = 1
    while True:
        vals = _action_var(gens) if n == 1 else None
        if n > 1:
            g, conj = box_average_conjugator(gens, n, grid)
            vals = _action_var(conj)
        if np.all(vals <= target) or n >= n_cap:
            if n == 1:
                return 1, identity_grid_map(grid), tuple(gens), vals
            return n, g, conj, vals
        n *= 2


class _StageInterpolation:
    """Conjugators between H_k and H_{k+1} = g_N W H_k, convex in log D.

    G_s has log DG_s = s (log Dg_N o W + log DW) + const.  Its singular
    part at a deformed end is that of the power germ with exponent
    alpha_s = 1 - s (1 - alpha), so G_s = R_s o W_s with W_s that power
    germ and R_s a map with bounded log-derivative.
    """

    def __init__(self, gens, alpha, eps, g_n, grid=None):
        self.gens, self.alpha, self.eps, self.g_n, self.grid = gens, alpha, eps, g_n, grid
        self.ident = g_n.is_identity()

    def _germs(self, a):
        e0, e1 = self.eps
        return (PowerGerm(a, e0) if e0 else None), (PowerGerm(a, e1) if e1 else None)

    def _W(self, a):
        lw, rw = self._germs(a)
        parts = [m for m in (lw, None if rw is None else ReflectedMap(rw)) if m is not None]
        return parts[0] if len(parts) == 1 else Composition(parts)

    def _diff(self, x, s, a_s):
        """s log DW(x) - log DW_s(x), constant on the power zones."""
        W, Ws = self._W(self.alpha), self._W(a_s)
        out = np.empty_like(x)
        e0, e1 = self.eps
        left = (x <= e0) if e0 else np.zeros(x.shape, bool)
        right = (x >= 1 - e1) if e1 else np.zeros(x.shape, bool)
        rest = ~(left | right)
        const = s * math.log(self.alpha) - math.log(a_s)
        out[left | right] = const
        if np.any(rest):
            xr = x[rest]
            out[rest] = s * W._log_deriv(xr) - Ws._log_deriv(xr)
        return out

    def _zone(self, side, a_s):
        i = 0 if side == "left" else 1
        e = self.eps[i]
        if not e:
            return None
        w, ws = self._germs(self.alpha)[i], self._germs(a_s)[i]
        if self.ident:
            zg = 0.5
        else:
            end = _affine_end(self.g_n, side)
            if end is None:
                return None
            zg = end[1]
        x = min(e, float(w.inverse()._eval(np.array([zg]))[0]))
        return float(ws._eval(np.array([x]))[0])

    def conjugator(self, s: float):
        a_s = 1.0 - s * (1.0 - self.alpha)
        W, Ws = self._W(self.alpha), self._W(a_s)
        Wsi = Ws.inverse()
        g_n = self.g_n

        def v(y):
            x = Wsi._eval(y)
            out = self._diff(x, s, a_s)
            if not self.ident:
                out = out + s * g_n._log_deriv(W._eval(x))
            return out

        sing = np.asarray(g_n.singular_points(), dtype=float)
        if sing.size:
            sing = Ws._eval(W.inverse()._eval(sing))
        e0, e1 = self.eps
        pts = [p for p in (e0, 2 * e0, 1 - e1, 1 - 2 * e1) if p and 0 < p < 1]
        sing = np.unique(np.concatenate([sing, Ws._eval(np.asarray(pts, dtype=float))]))
        zones = (self._zone("left", a_s), self._zone("right", a_s))
        grid = self.grid
        if grid is not None:
            # carry the nodes of g_n over to the coordinate of R_s
            grid = np.unique(np.clip(Ws._eval(W.inverse()._eval(np.asarray(grid))), 0.0, 1.0))
        R = _build(v, sing, zones, grid)
        return R, a_s

    def action(self, s: float):
        if s == 0.0:
            return tuple(self.gens)
        R, a_s = self.conjugator(s)
        return tuple(_conjugated(R, AlphaConjugate(g, a_s, self.eps)) for g in self.gens)


@dataclass
class ChartOrbit:
    """Forward orbits of one fundamental domain of a map with a repelling
    affine germ at 0 and an attracting affine germ at 1.

    Row i of ``x`` holds f^i of the seeds; every point of (0, 1) lies on one
    of these orbits, so sums along orbits sample log Df^N densely and in
    order without interpolation.
    """
    x: np.ndarray
    phi: np.ndarray
    lam: float
    mu: float
    zones: tuple

    @property
    def steps(self) -> int:
        return self.phi.shape[0]

    def _prefix(self, n: int):
        p = self.x.shape[1]
        ext = np.concatenate([np.full((n, p), math.log(self.lam)), self.phi,
                              np.full((2 * n, p), math.log(self.mu))])
        c = np.concatenate([np.zeros((1, p)), np.cumsum(ext, axis=0)])
        return c, np.arange(self.steps + n + 1)

    def mean_log_deriv(self, n: int) -> np.ndarray:
        """(1/n) log Df^n on the rows i = -n, ..., steps."""
        c, rows = self._prefix(n)
        return (c[rows + n] - c[rows]) / n

    def variation(self, n: int) -> float:
        """var(log Df^n) / n, sampled along the orbits."""
        return float(np.sum(np.abs(np.diff(self.mean_log_deriv(n).ravel()))))

    def positions(self, n: int) -> np.ndarray:
        rows = np.arange(-n, 0, dtype=float)
        back = self.x[0][None, :] * self.lam ** rows[:, None]
        return np.concatenate([back, self.x[:self.steps + 1]])

    def conjugate(self, n: int):
        """(g_n, g_n f g_n^{-1}) as tables on the orbit nodes.

        log Dg_n = (1/n) sum_{k<n} log Df^k, so the conjugate has log-derivative
        (1/n) log Df^n o g_n^{-1}; its table is exact at the nodes."""
        c, rows = self._prefix(n)
        d = np.concatenate([np.zeros((1, c.shape[1])), np.cumsum(c, axis=0)])
        u = (d[rows + n] - d[rows] - n * c[rows]) / n
        mean = (c[rows + n] - c[rows]) / n
        ll, lm = math.log(self.lam), math.log(self.mu)
        pos = self.positions(n)
        x = np.concatenate([[0.0], pos.ravel(), [1.0]])
        g = build_from_log_derivative(
            np.concatenate([[0.5 * (n - 1) * ll], u.ravel(), [0.5 * (n - 1) * lm]]), grid=x)
        zl = self.zones[0] * self.lam ** -(n - 1)
        zr = self.zones[1]
        sl, sr = float(g.dy[0]), float(g.dy[-1])
        g = GridMap(g.x, g.y, g.dy, log_deriv_fn=g.log_deriv_fn,
                    affine_ends=(sl, zl, sr, zr), check=False)
        nxt = np.empty_like(pos)
        nxt[:-1] = pos[1:]
        nxt[-1] = 1.0 - (1.0 - pos[-1]) * self.mu
        cy = np.concatenate([[0.0], g._eval(nxt.ravel()), [1.0]])
        dy = np.exp(np.concatenate([[ll], mean.ravel(), [lm]]))
        conj = GridMap(g.y.copy(), cy, dy, affine_ends=(
            self.lam, sl * zl / self.lam, self.mu, sr * zr))
        return g, conj


def chart_orbit(f, seeds: int = 256, max_steps: int = 100000) -> ChartOrbit:
    left, right = _affine_end(f, "left"), _affine_end(f, "right")
    if left is None or right is None:
        raise DiffeoError("orbit charts need affine germs at both ends")
    (lam, zl), (mu, zr) = left, right
    if not lam > 1.0 > mu:
        raise DiffeoError("orbit charts need a repelling end at 0 and an attracting end at 1")
    x = zl / lam * lam ** (np.arange(seeds) / seeds)
    xs, phis = [x], []
    while True:
        phis.append(f._log_deriv(x))
        x = f._eval(x)
        xs.append(x)
        if np.all(1.0 - x <= zr):
            break
        if len(phis) >= max_steps:
            raise DiffeoError("orbits do not reach the attracting zone")
    return ChartOrbit(np.array(xs), np.array(phis), lam, mu, (zl, zr))


def _stage_power(chart: ChartOrbit, target: float, n_cap: int):
    n = 1
    v = chart.variation(1)
    while v > target and n < n_cap:
        n *= 2
        v = chart.variation(n)
    return n, v


def staged_alpha_scheme(action, alpha: float = 0.25, stages: int = 3,
                        samples: int = DEFAULT_SAMPLES, factor: float = DEFAULT_FACTOR,
                        densify: bool = True, seeds: int = 256, n_cap: int = 4096):
    """Truncated concatenation for one generator with hyperbolic ends and
    trivial Mather invariant.

    Stage k conjugates the current map by the alpha power germs, then
    conjugates by the averaging map g_N with N the smallest power of two
    giving var(log D) <= (2 alpha)^k (|log Df(0)| + |log Df(1)|).  Variations
    and conjugates are computed along orbits of a fundamental domain, and the
    stage result is tabulated on those orbit nodes.  Between stages the
    conjugators are interpolated convexly in log D.  Returns (path, stage
    records).
    """
    act = as_action(action)
    if act.d != 1:
        raise DiffeoError("the staged scheme is implemented for one generator")
    if not 0 < alpha < 0.5:
        raise DiffeoError("the staged scheme needs 0 < alpha < 1/2")
    f0 = act.generators[0]
    a0, b0 = f0.log_multipliers()
    if a0 == 0 or b0 == 0:
        raise DiffeoError("the staged scheme needs two hyperbolic ends")
    mult = abs(a0) + abs(b0)
    # run on the generator that moves points to the right; its conjugates
    # invert back to those of f0
    flip = a0 < 0
    current = f0.inverse() if flip else f0
    records = []
    stage_maps = []
    for k in range(1, stages + 1):
        eps = _alpha_eps((current,), (True, True), None)
        bar = AlphaConjugate(current, alpha, eps)
        chart = chart_orbit(bar, seeds)
        target = (2 * alpha) ** k * mult
        n, v = _stage_power(chart, target, n_cap)
        g, conj = chart.conjugate(n)
        records.append({"stage": k, "n": n, "var": v, "bound": target,
                        "holds": bool(v <= target * (1 + 1e-3)),
                        "nodes": int(conj.x.size), "steps": chart.steps})
        stage_maps.append(_StageInterpolation((current,), alpha, eps, g, g.x))
        current = conj

    def builder(t):
        if t == 0.0:
            return act.generators
        if t == 1.0:
            acts = (current,)
        else:
            j, s = _segments(t, len(stage_maps))
            acts = stage_maps[j].action(s)
        return tuple(m.inverse() for m in acts) if flip else acts

    path = sample_path(builder, act.generators, "concatenation",
                       _budget(act.generators, factor), samples, densify,
                       {"scheme": "staged-alpha", "alpha": alpha, "stages": records})
    return path, records


def averaging_homotopy_scheme(action, root=None, samples: int = DEFAULT_SAMPLES,
                              factor: float = DEFAULT_FACTOR, densify: bool = True,
                              grid=None, n_cap: int = 256):
    """Box average the action with its root included until the root's
    conjugate F has var(log DF) <= 2 dist(f), then run F_t^m_i."""
    from .distortion import asymptotic_distortion

    act = as_action(action)
    f, exps = root_exponents(act, root)
    dist = asymptotic_distortion(f).value
    gens = act.generators + (f,)
    n, g, conj, vals = _average_until(gens, 2 * dist + 1e-12, n_cap=n_cap, grid=grid)
    if vals[-1] > 2 * dist + 1e-9:
        raise DiffeoError("averaging did not reach var <= 2 dist within the cap")
    F = conj[-1] if n > 1 else f
    box = box_average(gens, n) if n > 1 else None

    def builder(t):
        if t == 0.0:
            return act.generators
        if t <= 0.5 and n > 1:
            s = 2 * t
            gs = _build(lambda x: s * box.u(x), box.singular, box.zones, grid)
            return tuple(_conjugated(gs, h) for h in act.generators)
        tt = 0.0 if n > 1 and t <= 0.5 else (2 * t - 1 if n > 1 else t)
        Ft = linear_log_homotopy(F, tt, grid) if tt > 0 else F
        return _powers(Ft, exps) if tt > 0 else (
            tuple(_conjugated(g, h) for h in act.generators) if n > 1 else act.generators)

    path = sample_path(builder, act.generators, "concatenation",
                       _budget(act.generators, factor), samples, densify,
                       {"scheme": "average-then-homotopy", "n": n, "dist": dist,
                        "var_F": float(vals[-1]), "exponents": exps})
    return path


def homotopy_power_bounds(action, ts=(0.0, 0.25, 0.5, 0.75, 1.0), root=None,
                          slack: float = 1e-4) -> list[dict]:
    """var(log DF_t^m) against 2 (1 - t) dist(f^m) for the root's conjugate F."""
    from .distortion import asymptotic_distortion

    act = as_action(action)
    f, exps = root_exponents(act, root)
    dist = asymptotic_distortion(f).value
    gens = act.generators + (f,)
    n, g, conj, vals = _average_until(gens, 2 * dist + 1e-12)
    F = conj[-1] if n > 1 else f
    rows = []
    for t in ts:
        Ft = linear_log_homotopy(F, t)
        for m in exps:
            v = _var(iterate(Ft, m, fallback=True))
            rhs = 2 * (1 - t) * abs(m) * dist
            rows.append({"t": t, "m": m, "var": v, "bound": rhs,
                         "holds": bool(v <= rhs + slack)})
    return rows


# -- validation -----------------------------------------------------------------------

def path_report(path: DeformationPath, tol_budget: float = 1e-6) -> dict:
    """Budget, continuity, commutation and endpoint checks of a sampled path."""
    var = path.var
    max_var = var.max(axis=0)
    arg = var.argmax(axis=0)
    moduli = path.moduli
    if moduli is None or len(moduli) != len(path.actions) - 1:
        moduli = np.array([_action_modulus(path.actions[j], path.actions[j + 1])
                           for j in range(len(path.actions) - 1)])
    comm = 0.0
    if path.d > 1:
        for A in path.actions:
            comm = max(comm, ActionTuple(A).defect())
    endpoint = max(sup_gap(a, b) for a, b in zip(path.actions[0], path.source))
    budget_ok = [bool(mv <= b + tol_budget) for mv, b in zip(max_var, path.budget)]
    checks = []
    for i, (mv, b) in enumerate(zip(max_var, path.budget)):
        checks.append({"name": f"budget[{i}]", "lhs": float(mv), "rhs": float(b),
                       "relation": "<=", "holds": budget_ok[i], "tolerance": tol_budget})
    checks.append({"name": "commutation", "lhs": comm, "rhs": PATH_COMMUTE_TOL,
                   "relation": "<", "holds": bool(comm < PATH_COMMUTE_TOL),
                   "tolerance": 0.0})
    checks.append({"name": "endpoint", "lhs": endpoint, "rhs": ENDPOINT_TOL,
                   "relation": "<", "holds": bool(endpoint < ENDPOINT_TOL),
                   "tolerance": 0.0})
    return {
        "tag": path.tag,
        "samples": len(path.times),
        "max_var": max_var.tolist(),
        "argmax_t": [float(path.times[j]) for j in arg],
        "budget": path.budget.tolist(),
        "continuity_modulus": float(moduli.max()) if moduli.size else 0.0,
        "commutation_defect": comm,
        "endpoint_gap": endpoint,
        "checks": checks,
        "holds": all(c["holds"] for c in checks),
    }


def deform(action, method: str, samples: int = DEFAULT_SAMPLES,
           factor: float = DEFAULT_FACTOR, alpha: float = 0.25, n_max: int = 32,
           stages: int = 3) -> DeformationPath:
    """Dispatch on the CLI method names."""
    act = as_action(action)
    if method == "circle-average":
        return circle_average_path(act, n_max, samples, factor)
    if method == "box-average":
        return box_average_path(act, n_max, samples, factor)
    if method == "homotopy":
        return homotopy_path(act, samples=samples, factor=factor)
    if method == "alpha":
        return alpha_path(act, alpha, samples=samples, factor=factor)
    if method == "scheme34":
        from .mather import mather_diffeo
        f = act.generators[0]
        hyperbolic = all(_affine_end(g, s) is not None for g in act.generators
                         for s in ("left", "right"))
        if hyperbolic and mather_diffeo(f).trivial:
            return staged_alpha_scheme(act, alpha, stages, samples, factor)[0]
        return averaging_homotopy_scheme(act, samples=samples, factor=factor)
    raise DiffeoError(f"unknown deformation method {method!r}")
