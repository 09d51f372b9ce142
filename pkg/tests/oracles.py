"""Independent reference computations for the tests (no package imports)."""

import math
from decimal import Decimal, getcontext
from fractions import Fraction


# -- exact PL arithmetic on (breakpoints, slopes) pairs of Fractions -----------

def pl_value(bps, slopes, x):
    x = Fraction(x)
    y = Fraction(0)
    for a, b, s in zip(bps, bps[1:], slopes):
        if x <= b:
            return y + s * (x - a)
        y += s * (b - a)
    return y


def pl_inverse_value(bps, slopes, y):
    y = Fraction(y)
    v = Fraction(0)
    for a, b, s in zip(bps, bps[1:], slopes):
        w = v + s * (b - a)
        if y <= w:
            return a + (y - v) / s
        v = w
    return Fraction(1)


def pl_slope(bps, slopes, x):
    """Right slope at x."""
    x = Fraction(x)
    for a, b, s in zip(bps, bps[1:], slopes):
        if a <= x < b:
            return s
    return slopes[-1]


def pl_compose(f, g):
    """f o g as (breakpoints, slopes)."""
    (fb, fs), (gb, gs) = f, g
    pts = sorted(set(gb) | {pl_inverse_value(gb, gs, b) for b in fb})
    slopes = [pl_slope(fb, fs, pl_value(gb, gs, a)) * pl_slope(gb, gs, a) for a in pts[:-1]]
    return canonical(pts, slopes)


def canonical(pts, slopes):
    """Drop breakpoints between equal slopes."""
    out_b, out_s = [pts[0]], []
    for a, s in zip(pts[:-1], slopes):
        if out_s and out_s[-1] == s:
            continue
        if out_s:
            out_b.append(a)
        out_s.append(s)
    out_b.append(Fraction(1))
    return out_b, out_s


def pl_var(slopes):
    return sum(abs(math.log(b / a)) for a, b in zip(slopes, slopes[1:]))


# -- Mobius flow x' = x (1 - x) ------------------------------------------------

def mobius(t, x):
    return math.exp(t) * x / (1.0 + math.expm1(t) * x)


def mobius_deriv(t, x):
    return math.exp(t) / (1.0 + math.expm1(t) * x) ** 2


# -- implicit Sternberg relation y (1 - log y) = e^lam x (1 - log x) -------------

def sternberg_decimal(lam, x, digits: int = 50):
    """y in (0, 1/e] by bisection in Decimal arithmetic."""
    getcontext().prec = digits
    x = Decimal(str(x))
    target = Decimal(lam).exp() * x * (1 - x.ln())

    def phi(y):
        return y * (1 - y.ln())

    lo, hi = Decimal("1e-300"), Decimal(-1).exp()
    for _ in range(400):
        mid = (lo + hi) / 2
        if phi(mid) < target:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2
