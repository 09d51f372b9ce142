"""Closed-form and root-solved interval maps, plus generic wrappers."""

from __future__ import annotations

import math

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import solve_ivp
from scipy.special import expit, log_expit, logit

from ._base import Diffeo1D, DiffeoError, Germ
from .roots import bisect_increasing, invert_on_unit_interval, newton_polish


class MobiusFlow(Diffeo1D):
    """Time-lam map of the field x(1 - x): f(x) = e^lam x / (1 + (e^lam - 1) x)."""

    def __init__(self, lam: float):
        self.lam = float(lam)
        self._q = math.expm1(self.lam)

    def _eval(self, x):
        return math.exp(self.lam) * x / (1.0 + self._q * x)

    def _log_deriv(self, x):
        return self.lam - 2.0 * np.log1p(self._q * x)

    def _affine_deriv(self, x):
        return -2.0 * self._q / (1.0 + self._q * x)

    def inverse(self):
        return MobiusFlow(-self.lam)

    def reflected(self):
        return MobiusFlow(-self.lam)

    def germ(self, side):
        lam = self.lam if side == "left" else -self.lam
        return Germ(zone=1.0,
                    field=lambda y: lam * np.asarray(y) * (1 - np.asarray(y)),
                    dlog=lambda y: 1 / np.asarray(y) - 1 / (1 - np.asarray(y)))

    def log_multipliers(self):
        return self.lam, -self.lam

    def is_identity(self):
        return self.lam == 0.0

    def to_spec(self):
        return {"type": "mobius", "lambda": self.lam}

    def __repr__(self):
        return f"MobiusFlow({self.lam!r})"


class FlowMap(Diffeo1D):
    """Time-t map of a polynomial vector field X(x) = sum c_i x^i on [0, 1].

    The field must vanish at 0 and 1 and keep one sign inside.  The flow
    is integrated in logit coordinates s = log(x / (1 - x)), where it reads
    ds/dt = X(x) / (x (1 - x)), so relative accuracy holds near both ends.
    """

    rtol = 1e-13

    def __init__(self, coeffs, time: float = 1.0):
        c = np.trim_zeros(np.asarray(coeffs, dtype=float), "b")
        if c.size < 2 or abs(c[0]) > 1e-14 or abs(P.polyval(1.0, c)) > 1e-12:
            raise DiffeoError("flow field must vanish at 0 and 1")
        self.coeffs = tuple(float(v) for v in c)
        self.time = float(time)
        q, r = P.polydiv(c[1:], np.array([1.0, -1.0]))
        if np.max(np.abs(r)) > 1e-12:
            raise DiffeoError("flow field must vanish at 1")
        self._q = np.atleast_1d(q)
        probe = P.polyval(np.linspace(0.0, 1.0, 257)[1:-1], self._q)
        if not (np.all(probe > 0) or np.all(probe < 0)):
            raise DiffeoError("flow field changes sign inside (0, 1)")
        self._dc = P.polyder(c)

    # field helpers
    def field(self, x):
        return P.polyval(np.asarray(x, dtype=float), np.asarray(self.coeffs))

    def field_deriv(self, x):
        return P.polyval(np.asarray(x, dtype=float), self._dc)

    def _log_field_s(self, s):
        x = expit(s)
        return np.log(np.abs(P.polyval(x, self._q))) + log_expit(s) + log_expit(-s)

    def _flow_s(self, s, t):
        if t == 0 or s.size == 0:
            return s.copy()
        q = self._q
        sol = solve_ivp(lambda _t, y: P.polyval(expit(y), q), (0.0, t), s,
                        method="DOP853", rtol=self.rtol, atol=1e-13)
        if not sol.success:
            raise DiffeoError(f"flow integration failed: {sol.message}")
        return sol.y[:, -1]

    def _split(self, x):
        inner = (x > 0) & (x < 1)
        return inner, logit(x[inner])

    def _eval(self, x):
        out = x.copy()
        inner, s = self._split(x)
        out[inner] = expit(self._flow_s(s, self.time))
        return out

    def _log_deriv(self, x):
        out = np.empty_like(x)
        inner, s = self._split(x)
        s1 = self._flow_s(s, self.time)
        out[inner] = self._log_field_s(s1) - self._log_field_s(s)
        out[x <= 0] = self.time * P.polyval(0.0, self._q)
        out[x >= 1] = -self.time * P.polyval(1.0, self._q)
        return out

    def _affine_deriv(self, x):
        # Lf = (X'(y) - X'(x)) / X(x), with y - x taken in logit space and
        # X'(y) - X'(x) as a divided difference to avoid cancellation
        out = np.zeros_like(x)
        inner, s = self._split(x)
        s1 = self._flow_s(s, self.time)
        xi, yi = expit(s), expit(s1)
        gap = np.where(xi < 0.5, yi - xi, expit(-s) - expit(-s1))
        dd = np.zeros_like(xi)
        for k, ck in enumerate(self._dc):
            if k == 0:
                continue
            dd += ck * sum(yi**j * xi**(k - 1 - j) for j in range(k))
        q = P.polyval(xi, self._q)
        out[inner] = dd * gap / (q * xi * expit(-s))
        return out

    def inverse(self):
        return FlowMap(self.coeffs, -self.time)

    def reflected(self):
        # X_R(u) = -X(1 - u)
        c = np.asarray(self.coeffs)
        comp = np.zeros(1)
        base = np.array([1.0, -1.0])
        power = np.ones(1)
        for ci in c:
            comp = P.polyadd(comp, ci * power)
            power = P.polymul(power, base)
        comp = -comp
        comp[0] = 0.0
        return FlowMap(comp, self.time)

    def germ(self, side):
        if side == "right":
            return self.reflected().germ("left")
        t = self.time
        return Germ(zone=1.0,
                    field=lambda y: t * self.field(y),
                    dlog=lambda y: self.field_deriv(y) / self.field(y))

    def is_identity(self):
        return self.time == 0.0

    def to_spec(self):
        return {"type": "flow", "coeffs": list(self.coeffs), "time": self.time}

    def __repr__(self):
        return f"FlowMap({list(self.coeffs)!r}, time={self.time!r})"


class SineMap(Diffeo1D):
    """x + amp sin(2 pi x), a homeomorphism of [0, 1] when |2 pi amp| < 1."""

    def __init__(self, amp: float):
        self.amp = float(amp)
        if abs(2 * math.pi * self.amp) >= 1:
            raise DiffeoError("sine perturbation too large to stay monotone")

    def _eval(self, x):
        return x + self.amp * np.sin(2 * np.pi * x)

    def _deriv(self, x):
        return 1 + 2 * np.pi * self.amp * np.cos(2 * np.pi * x)

    def _affine_deriv(self, x):
        return (-4 * np.pi**2 * self.amp * np.sin(2 * np.pi * x)
                / self._deriv(x))

    def reflected(self):
        return self

    def is_identity(self):
        return self.amp == 0.0

    def to_spec(self):
        return {"type": "sine", "amp": self.amp}


class PowerGerm(Diffeo1D):
    """Conjugator x -> eps^(1-alpha) x^alpha on [0, eps], blended to the
    identity on [eps, 2 eps] by a monotone cubic, identity beyond.

    Not differentiable at 0 when alpha < 1; smooth elsewhere with a
    continuous derivative.
    """

    def __init__(self, alpha: float, eps: float):
        if not 0 < alpha <= 1:
            raise DiffeoError("alpha must lie in (0, 1]")
        if not 0 < eps <= 0.5:
            raise DiffeoError("eps must lie in (0, 1/2]")
        self.alpha = float(alpha)
        self.eps = float(eps)
        e, a = self.eps, self.alpha
        # cubic Hermite on [e, 2e]: values e -> 2e, slopes a -> 1,
        # written in u = (x - e) / e
        self._h = (e, a)

    def _blend(self, x, order=0):
        e, a = self._h
        u = (x - e) / e
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        if order == 0:
            return h00 * e + h10 * e * a + h01 * 2 * e + h11 * e
        d00 = 6 * u**2 - 6 * u
        d10 = 3 * u**2 - 4 * u + 1
        d01 = -6 * u**2 + 6 * u
        d11 = 3 * u**2 - 2 * u
        if order == 1:
            return (d00 * e + d10 * e * a + d01 * 2 * e + d11 * e) / e
        s00 = 12 * u - 6
        s10 = 6 * u - 4
        s01 = -12 * u + 6
        s11 = 6 * u - 2
        return (s00 * e + s10 * e * a + s01 * 2 * e + s11 * e) / e**2

    def blend_variation(self) -> float:
        """var(log DW) on [eps, 2 eps].  The blend derivative is the quadratic
        (3a - 3) u^2 + (4 - 4a) u + a, rising from a to its peak (4 - a)/3
        at u = 2/3 and falling back to 1."""
        a = self.alpha
        return 2.0 * math.log((4.0 - a) / 3.0) - math.log(a)

    def _eval(self, x):
        e, a = self.eps, self.alpha
        out = x.copy()
        low = x <= e
        mid = (x > e) & (x < 2 * e)
        out[low] = e ** (1 - a) * x[low] ** a
        out[mid] = self._blend(x[mid])
        return out

    def _deriv(self, x):
        e, a = self.eps, self.alpha
        out = np.ones_like(x)
        low = x <= e
        mid = (x > e) & (x < 2 * e)
        with np.errstate(divide="ignore"):
            out[low] = a * e ** (1 - a) * x[low] ** (a - 1)
        out[mid] = self._blend(x[mid], 1)
        return out

    def _log_deriv(self, x):
        e, a = self.eps, self.alpha
        out = np.zeros_like(x)
        low = x <= e
        mid = (x > e) & (x < 2 * e)
        with np.errstate(divide="ignore"):
            out[low] = math.log(a) + (1 - a) * (math.log(e) - np.log(x[low]))
        out[mid] = np.log(self._blend(x[mid], 1))
        return out

    def _affine_deriv(self, x):
        e, a = self.eps, self.alpha
        out = np.zeros_like(x)
        low = x <= e
        mid = (x > e) & (x < 2 * e)
        with np.errstate(divide="ignore"):
            out[low] = (a - 1) / x[low]
        out[mid] = self._blend(x[mid], 2) / self._blend(x[mid], 1)
        return out

    def inverse(self):
        return _PowerGermInverse(self)

    def is_identity(self):
        return self.alpha == 1.0

    def to_spec(self):
        return {"type": "power", "alpha": self.alpha, "eps": self.eps}


class _PowerGermInverse(Diffeo1D):
    def __init__(self, w: PowerGerm):
        self.w = w

    def _eval(self, y):
        e, a = self.w.eps, self.w.alpha
        out = y.copy()
        low = y <= e
        mid = (y > e) & (y < 2 * e)
        out[low] = (y[low] / e ** (1 - a)) ** (1 / a)
        if np.any(mid):
            t = y[mid]
            lo, hi = bisect_increasing(self.w._blend, t, e, 2 * e, check=False)
            x = 0.5 * (lo + hi)
            out[mid] = newton_polish(self.w._blend,
                                     lambda z: self.w._blend(z, 1), t, x, lo, hi)
        return out

    def _log_deriv(self, y):
        return -self.w._log_deriv(self._eval(y))

    def _affine_deriv(self, y):
        x = self._eval(y)
        return -self.w._affine_deriv(x) / self.w._deriv(x)

    def inverse(self):
        return self.w

    def to_spec(self):
        return {"type": "inverse", "map": self.w.to_spec()}


class Composition(Diffeo1D):
    """maps[0] o maps[1] o ... o maps[-1] (the last map is applied first)."""

    def __init__(self, maps, germs: dict | None = None):
        flat = []
        for m in maps:
            if isinstance(m, Composition) and not m._germs:
                flat.extend(m.maps)
            else:
                flat.append(m)
        flat = [m for m in flat if not m.is_identity()]
        self.maps = tuple(flat)
        self._germs = dict(germs or {})

    def _eval(self, x):
        y = x
        for m in reversed(self.maps):
            y = m._eval(y)
        return y

    def _log_deriv(self, x):
        y = x
        total = np.zeros_like(x)
        for m in reversed(self.maps):
            total = total + m._log_deriv(y)
            y = m._eval(y)
        return total

    def _affine_deriv(self, x):
        y = x
        L = np.zeros_like(x)
        logD = np.zeros_like(x)
        for m in reversed(self.maps):
            L = L + m._affine_deriv(y) * np.exp(logD)
            logD = logD + m._log_deriv(y)
            y = m._eval(y)
        return L

    def inverse(self):
        germs = {}
        for side, g in self._germs.items():
            germs[side] = _negated_germ(g)
        return Composition([m.inverse() for m in reversed(self.maps)], germs)

    def reflected(self):
        germs = {}
        if "left" in self._germs:
            germs["right"] = self._germs["left"]
        if "right" in self._germs:
            germs["left"] = self._germs["right"]
        return Composition([m.reflected() for m in self.maps], germs)

    def singular_points(self):
        pts = []
        inner_inverse = []
        for m in reversed(self.maps):
            sp = np.asarray(m.singular_points(), dtype=float)
            for inv in reversed(inner_inverse):
                if sp.size == 0:
                    break
                sp = inv._eval(sp)
            pts.append(sp)
            inner_inverse.append(m.inverse())
        if not pts:
            return np.empty(0)
        allp = np.unique(np.concatenate(pts))
        return allp[(allp > 0) & (allp < 1)]

    def germ(self, side):
        if side in self._germs:
            return self._germs[side]
        if side == "right":
            g = self.reflected().germ("left")
            return g
        # compose affine germs when every factor has one
        slope = 1.0
        zone = 1.0
        inner = []
        for m in reversed(self.maps):
            g = m.germ("left")
            if g is None or g.kind != "affine":
                return None
            z = g.zone
            for prev in reversed(inner):
                z = prev.inverse()._eval(np.array([z]))[0]
            zone = min(zone, z)
            slope *= math.exp(float(g.field(np.array([1.0]))[0]))
            inner.append(m)
        from ._base import affine_germ
        return affine_germ(slope, zone)

    def log_multipliers(self):
        a = b = 0.0
        for m in self.maps:
            la, lb = m.log_multipliers()
            a += la
            b += lb
        return a, b

    def is_identity(self):
        return len(self.maps) == 0

    def to_spec(self):
        return {"type": "compose", "maps": [m.to_spec() for m in self.maps]}


def _negated_germ(g: Germ) -> Germ:
    return Germ(zone=g.zone, field=lambda y: -g.field(y), dlog=g.dlog, kind=g.kind)


class InverseMap(Diffeo1D):
    """Inverse of a map without a closed-form inverse (root-solved)."""

    def __init__(self, f: Diffeo1D):
        self.f = f

    def _eval(self, y):
        f = self.f
        return invert_on_unit_interval(f._eval, y, f._deriv)

    def _log_deriv(self, y):
        return -self.f._log_deriv(self._eval(y))

    def _affine_deriv(self, y):
        x = self._eval(y)
        return -self.f._affine_deriv(x) / self.f._deriv(x)

    def inverse(self):
        return self.f

    def reflected(self):
        return InverseMap(self.f.reflected())

    def singular_points(self):
        sp = self.f.singular_points()
        return self.f._eval(sp) if sp.size else sp

    def germ(self, side):
        g = self.f.germ(side)
        return None if g is None else _negated_germ(g)

    def log_multipliers(self):
        a, b = self.f.log_multipliers()
        return -a, -b

    def is_identity(self):
        return self.f.is_identity()

    def to_spec(self):
        return {"type": "inverse", "map": self.f.to_spec()}


class ReflectedMap(Diffeo1D):
    """u -> 1 - f(1 - u)."""

    def __init__(self, f: Diffeo1D):
        self.f = f

    def _eval(self, u):
        return 1.0 - self.f._eval(1.0 - u)

    def _log_deriv(self, u):
        return self.f._log_deriv(1.0 - u)

    def _affine_deriv(self, u):
        return -self.f._affine_deriv(1.0 - u)

    def inverse(self):
        return ReflectedMap(self.f.inverse())

    def reflected(self):
        return self.f

    def singular_points(self):
        return np.sort(1.0 - self.f.singular_points())

    def germ(self, side):
        return self.f.germ("right" if side == "left" else "left")

    def log_multipliers(self):
        a, b = self.f.log_multipliers()
        return b, a

    def is_identity(self):
        return self.f.is_identity()
