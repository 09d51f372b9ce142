"""Mather invariant by renormalization, its variation, and the Mather
homomorphism.

For h(x) > x with left field X (chart P_X) and right field Y (chart P_Y),
both charts based at a, the Mather diffeomorphism on one period is

    M(t) = P_Y(h^k(psi_X(t - n))) - m,    k = m + n,

with n, m chosen so that psi_X(t - n) sits deep in the left end and
h^k(psi_X(t - n)) deep in the right end.  Its log-derivative is evaluated
through the chain rule, not by differencing samples of M:

    log DM(t) = log X(x_t) - log Y(h^k x_t) + log Dh^k(x_t),  x_t = psi_X(t - n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ._base import Diffeo1D, DiffeoError
from .analytic import Composition, InverseMap, ReflectedMap
from .circle import CircleLift
from .core import SINGULAR_OFFSET, delta_sign
from .grid import GridMap
from .pl import PLMap, pl_iterate
from .szekeres import Chart, LeftCore

TRIVIAL_TOL = 1e-6
DEFAULT_SAMPLES = 2048
_MAX_DEPTH = 100_000


class PreconditionError(DiffeoError):
    """Depth parameters too small; carries the smallest admissible (m, n)."""

    def __init__(self, message: str, m: int, n: int):
        super().__init__(message)
        self.m = m
        self.n = n


@dataclass
class MatherInvariant:
    f: Diffeo1D
    a: float
    m: int
    n: int
    t: np.ndarray
    values: np.ndarray
    log_dm: np.ndarray
    var: float
    var_error: float
    method: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return self.m + self.n

    @property
    def trivial(self) -> bool:
        return self.var < TRIVIAL_TOL

    def as_interval_map(self) -> GridMap:
        keep = np.concatenate([[True], np.diff(self.t) > 0])
        return GridMap(self.t[keep], self.values[keep], np.exp(self.log_dm[keep]),
                       check=False)

    def lift(self) -> CircleLift:
        """M as the lift of a circle map (M(t + 1) = M(t) + 1)."""
        return CircleLift(self.as_interval_map())

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        fl = np.floor(t)
        return fl + np.interp(t - fl, self.t, self.values)


def _orient(f: Diffeo1D) -> Diffeo1D:
    s = delta_sign(f)
    if s == 0:
        raise DiffeoError("interior fixed point detected; the map is not fixed-point free")
    return f if s > 0 else f.inverse()


def _scalar(g, x: float) -> float:
    return float(g._eval(np.array([x], dtype=float))[0])


def _orbit(g, x: float, count: int) -> float:
    for _ in range(count):
        x = _scalar(g, x)
    return x


def _pl_zones(h: PLMap):
    """(left zone, right zone in u = 1 - x) where the fields are linear."""
    return float(h.germ("left").zone), float(h.reflected().inverse().germ("left").zone)


def admissible_depths(h: Diffeo1D, a: float, delta0: float = 0.02,
                      delta1: float = 0.02, affine_zones: bool = False) -> tuple[int, int]:
    """Smallest (m, n) with h^{-n}(h(a)) < delta0 and h^m(a) > 1 - delta1.

    With ``affine_zones`` (PL maps) the fundamental interval near 0 and its
    image near 1 are also pushed inside the affine end zones.
    """
    hinv = h.inverse()
    kinv = h.reflected()
    lo0, lo1 = delta0, delta1
    if affine_zones:
        z0, z1 = _pl_zones(h)
        lo0, lo1 = min(lo0, z0), min(lo1, z1)
    n, x = 1, a
    while not x < lo0:
        x = _scalar(hinv, x)
        n += 1
        if n > _MAX_DEPTH:
            raise DiffeoError("orbit does not approach 0")
    m, u = 0, 1.0 - a
    while not u < lo1:
        u = _scalar(kinv, u)
        m += 1
        if m > _MAX_DEPTH:
            raise DiffeoError("orbit does not approach 1")
    return m, n


def _check_depths(h, a, m, n, delta0, delta1, pl_exact):
    mm, nn = admissible_depths(h, a, delta0, delta1, affine_zones=pl_exact)
    if m is None and n is None:
        return mm, nn
    m = mm if m is None else int(m)
    n = nn if n is None else int(n)
    if m < mm or n < nn:
        raise PreconditionError(
            f"depths m={m}, n={n} too small; smallest admissible are m={mm}, n={nn}",
            mm, nn)
    return m, n


def mather_diffeo(f: Diffeo1D, a: float = 0.5, m: int | None = None,
                  n: int | None = None, samples: int = DEFAULT_SAMPLES,
                  delta0: float = 0.02, delta1: float = 0.02, tol: float = 1e-9,
                  method: str = "auto") -> MatherInvariant:
    """Mather diffeomorphism of a fixed-point-free f on one period.

    Maps with f(x) < x are handled through f^{-1} (the variation is the
    same).  ``method``: 'auto' uses exact PL arithmetic for exact PL maps
    and chain-rule sampling otherwise; 'sampled' forces sampling.
    """
    if not 0 < a < 1:
        raise DiffeoError("base point must lie in (0, 1)")
    h = _orient(f)
    pl_exact = method == "auto" and isinstance(h, PLMap) and h.exact
    m, n = _check_depths(h, a, m, n, delta0, delta1, pl_exact)
    hinv = h.inverse()
    kinv = h.reflected()            # u -> 1 - h(1 - u)
    k_map = kinv.inverse()          # core map at 1, k(u) > u

    left = LeftCore(h, tol=tol)
    right = LeftCore(k_map, tol=tol)
    b = _orbit(hinv, a, n)
    ub = _orbit(kinv, 1.0 - a, m + 1)
    cx = Chart(left, b, b)
    cy = Chart(right, ub, ub)

    # singular t-values: where x_t meets the orbit of a break of h
    sing_x = left.singular_orbit(cx.b, cx.hb)
    t_sing = cx.local(sing_x) if sing_x.size else np.empty(0)
    t = np.linspace(0.0, 1.0, samples + 1)
    if t_sing.size:
        off = SINGULAR_OFFSET
        # a break at the period boundary is seen from both sides of the period
        t_sing = np.concatenate([t_sing, t_sing[t_sing < off] + 1.0,
                                 t_sing[t_sing > 1.0 - off] - 1.0])
        t = np.unique(np.clip(np.concatenate([t, t_sing - off, t_sing + off]), 0.0, 1.0))
    x = cx.psi_local(t)
    x[0], x[-1] = cx.b, cx.hb

    # forward orbit: n steps near 0 in x, m steps near 1 in u = 1 - x
    logdk = np.zeros_like(x)
    y = x.copy()
    for _ in range(n):
        logdk += h._log_deriv(y)
        y = h._eval(y)
    u = 1.0 - y
    for _ in range(m):
        logdk += kinv._log_deriv(u)
        u = kinv._eval(u)
    u[0], u[-1] = cy.hb, cy.b
    values = 1.0 - cy.local(u)
    values[0], values[-1] = 0.0, 1.0
    log_dm = left.log_field(x) - right.log_field(u) + logdk \
        + math.log(cy.tau / cx.tau)

    # t = 0 and t = 1 are the same point of the circle: the variation is
    # taken cyclically over t in [0, 1) so a break at the seam counts once
    closure = abs(log_dm[-2] - log_dm[0])
    var = _cyclic_var(log_dm[:-1])
    keep = np.ones(t.size, bool)
    keep[1:-1:2] = False
    if t_sing.size:
        near = np.min(np.abs(t[:, None] - t_sing[None, :]), axis=1) < 1e-9
        keep |= near
    keep[-1] = False
    coarse = _cyclic_var(log_dm[keep])
    used = "sampled"
    var_err = abs(var - coarse)
    if pl_exact:
        var = pl_mather_variation(h, a, m, n)
        var_err = 0.0
        used = "pl-exact"
    diag = {"tau_x": cx.tau, "tau_y": cy.tau, "closure": closure,
            "sampled_var": _cyclic_var(log_dm[:-1]),
            "field_iterations": (left.iterations, right.iterations),
            "seeds": (left.seed_kind, right.seed_kind),
            "orientation": 1 if h is f else -1}
    return MatherInvariant(f=f, a=float(a), m=m, n=n, t=t, values=values,
                           log_dm=log_dm, var=var, var_error=var_err,
                           method=used, diagnostics=diag)


def _cyclic_var(v) -> float:
    return float(np.sum(np.abs(np.diff(v))) + abs(v[-1] - v[0]))


def pl_mather_variation(h: PLMap, a, m: int, n: int) -> float:
    """var(log DM) of an exact PL map with h(x) > x.

    On I = [h^{-n} a, h^{-n+1} a] (inside the left affine zone, with h^k(I)
    inside the right one) log DM(t) = G(x_t) with
    G(x) = log(lam x) - log(|mu| (1 - h^k x)) + log Dh^k(x).  The first two
    terms are increasing and continuous, so the variation is their total
    increase, lam + |mu|, plus the jumps of log Dh^k on the half-open period
    [h^{-n} a, h^{-n+1} a): a break at the left end is the seam jump of the
    circle map, counted once.
    """
    a = Fraction(a).limit_denominator(10**12) if not isinstance(a, Fraction) else a
    hinv = h.inverse()
    lo = a
    for _ in range(n):
        lo = hinv.value_at(lo)
    hi = h.value_at(lo)
    z0, z1 = _pl_zones(h)
    hk = pl_iterate(h, m + n)
    if float(hi) > z0 or 1 - float(hk.value_at(lo)) > z1:
        raise DiffeoError("fundamental interval is not inside the affine end zones")
    lam, mu = h.log_multipliers()
    return float(lam + abs(mu) + hk.jump_sum(lo, hi) + hk.jump_sum(lo, lo, closed=True))


def mather_variation(M: MatherInvariant) -> float:
    return M.var


def sup_distance(M1: MatherInvariant, M2: MatherInvariant, samples: int = 4097) -> float:
    """sup |M1 - M2| after aligning both so that M(0) = 0."""
    t = np.linspace(0.0, 1.0, samples)
    return float(np.max(np.abs((M1(t) - M1(0.0)) - (M2(t) - M2(0.0)))))


def rotation_quotient_distance(M1: MatherInvariant, M2: MatherInvariant,
                               samples: int = 4097) -> float:
    """Distance between two invariants modulo rotations on both sides:
    min over s of sup |M1(t) - M2(t + s) + M2(s)| (s on the sample grid,
    polished by a local search)."""
    from scipy.optimize import minimize_scalar
    t = np.linspace(0.0, 1.0, samples)
    base = M1(t)

    def cost(s):
        return float(np.max(np.abs(base - (M2(t + s) - M2(s)))))

    grid = np.linspace(0.0, 1.0, 257)
    s0 = grid[np.argmin([cost(s) for s in grid])]
    res = minimize_scalar(cost, bounds=(s0 - 1 / 256, s0 + 1 / 256), method="bounded",
                          options={"xatol": 1e-12})
    return min(float(res.fun), cost(s0))


# -- Mather homomorphism --------------------------------------------------------

def mather_homomorphism(f: Diffeo1D) -> float:
    """Total mass of the absolutely continuous part of d(log Df).

    PL maps give 0 (purely atomic measure).  Compositions and inverses are
    reduced to their components.  Other maps are treated as AC between their
    singular points: on each such piece the integral of the affine
    derivative equals the change of log Df across the piece.
    """
    if isinstance(f, PLMap):
        return 0.0
    if isinstance(f, Composition):
        return float(sum(mather_homomorphism(g) for g in f.maps))
    if isinstance(f, InverseMap):
        return -mather_homomorphism(f.f)
    if isinstance(f, ReflectedMap):
        return -mather_homomorphism(f.f)
    if getattr(f, "domain", "interval") != "interval":
        raise DiffeoError("the Mather homomorphism is defined for interval maps")
    return ac_mass(f)


def ac_mass(f: Diffeo1D, offset: float = 1e-13) -> float:
    """Sum over pieces between singular points of the change of log Df."""
    sp = np.asarray(f.singular_points(), dtype=float)
    sp = np.unique(sp[(sp > 0) & (sp < 1)])
    lam, mu = f.log_multipliers()
    if sp.size == 0:
        return float(mu - lam)
    left = f._log_deriv(sp - offset)
    right = f._log_deriv(sp + offset)
    starts = np.concatenate([[lam], right])
    ends = np.concatenate([left, [mu]])
    return float(np.sum(ends - starts))


def ac_mass_quadrature(f: Diffeo1D) -> float:
    """Integral of the affine derivative by adaptive quadrature (a check
    on :func:`ac_mass` for maps with integrable Lf)."""
    from scipy.integrate import quad
    sp = np.asarray(f.singular_points(), dtype=float)
    pts = np.unique(np.concatenate([[0.0, 1.0], sp[(sp > 0) & (sp < 1)]]))
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        val, _ = quad(lambda x: float(f._affine_deriv(np.array([x]))[0]), lo, hi,
                      limit=200, epsabs=1e-13, epsrel=1e-12)
        total += val
    return total


# -- fundamental relations --------------------------------------------------------

def fundamental_check(f: Diffeo1D, dist: float | None = None, var_dm: float | None = None,
                      slack: float = 1e-4, **mather_kw) -> dict:
    """Check |var(log DM) - dist| <= |lam| + |mu|, plus, for PL maps, the
    equality var(log DM) = |lam| + |mu| + dist and var(log DM) >= 2 (|lam| + |mu|).

    ``dist`` is the asymptotic distortion (computed when omitted).
    """
    lam, mu = f.log_multipliers()
    rhs = abs(lam) + abs(mu)
    dist_err = 0.0
    if dist is None:
        from .distortion import asymptotic_distortion
        res = asymptotic_distortion(f)
        dist, dist_err = res.value, res.error
    if var_dm is None:
        var_dm = mather_diffeo(f, **mather_kw).var
    lhs = abs(var_dm - dist)
    out = {"var_dm": var_dm, "dist": dist, "dist_error": dist_err, "lhs": lhs,
           "rhs": rhs, "holds": bool(lhs <= rhs + slack)}
    if isinstance(f, PLMap):
        out["equality_residual"] = abs(var_dm - (rhs + dist))
        out["lower_bound_holds"] = bool(var_dm >= 2 * rhs - slack)
    return out
