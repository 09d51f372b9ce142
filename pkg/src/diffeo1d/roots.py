"""Vectorized root finding for monotone functions.

Bisection is unconditionally safe for increasing maps; a single Newton
step afterwards recovers the last digits.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit

from ._base import RootFindingError

# logit range that covers every float in (0, 1)
_S_LO, _S_HI = -745.0, 40.0


def bisect_increasing(fun, target, lo, hi, width: float = 1e-14,
                      max_iter: int = 400, check: bool = True):
    """Bracket solutions of fun(x) = target for an increasing ``fun``.

    ``lo``/``hi`` broadcast against ``target``; returns the final bracket.
    ``width`` is absolute below 1 in magnitude and relative above.
    """
    target = np.asarray(target, dtype=float)
    lo = np.array(np.broadcast_to(lo, target.shape), dtype=float)
    hi = np.array(np.broadcast_to(hi, target.shape), dtype=float)
    if check and target.size:
        flo, fhi = fun(lo), fun(hi)
        bad = (flo > target) | (fhi < target)
        if np.any(bad):
            raise RootFindingError(
                f"bracket does not contain the root for {int(bad.sum())} points")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        open_ = ((hi - lo) > width * np.maximum(1.0, np.abs(mid))) & (mid > lo) & (mid < hi)
        if not np.any(open_):
            break
        fm = fun(mid)
        if np.any(np.isnan(fm)):
            raise RootFindingError("function returned NaN inside the bracket")
        up = fm < target
        lo = np.where(open_ & up, mid, lo)
        hi = np.where(open_ & ~up, mid, hi)
    else:
        raise RootFindingError("bisection did not reach the requested width")
    return lo, hi


def newton_polish(fun, dfun, target, x, lo, hi):
    """One Newton step, kept inside [lo, hi]."""
    if dfun is None:
        return x
    with np.errstate(all="ignore"):
        step = (fun(x) - target) / dfun(x)
    new = x - step
    ok = np.isfinite(new) & (new >= lo) & (new <= hi)
    return np.where(ok, new, x)


def invert_on_unit_interval(fun, target, dfun=None, width: float = 1e-14):
    """Solve fun(x) = target for an increasing homeomorphism of [0, 1].

    Bisection runs in logit coordinates so that relative accuracy is kept
    near both endpoints.
    """
    y = np.asarray(target, dtype=float)
    out = np.array(y, dtype=float, copy=True)
    inner = (y > 0) & (y < 1)
    if not np.any(inner):
        return out
    yi = y[inner]
    lo, hi = bisect_increasing(lambda s: fun(expit(s)), yi, _S_LO, _S_HI,
                               width=width, check=False)
    s = 0.5 * (lo + hi)
    x = expit(s)
    x = newton_polish(fun, dfun, yi, x, expit(lo), expit(hi))
    out[inner] = x
    return out
