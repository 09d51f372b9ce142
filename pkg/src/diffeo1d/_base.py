"""Base class, errors and small helpers shared by every map representation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class DiffeoError(ValueError):
    """Base error for invalid maps or inputs."""


class DomainError(DiffeoError):
    pass


class RootFindingError(DiffeoError):
    pass


class BreakpointOverflow(DiffeoError):
    """Raised when an exact PL computation exceeds the breakpoint cap.

    The message suggests switching to a grid representation; ``pieces``
    holds the size that was about to be produced.
    """

    def __init__(self, pieces: int, cap: int):
        self.pieces = pieces
        self.cap = cap
        super().__init__(
            f"PL composition would produce {pieces} pieces (cap {cap}); "
            "use a grid representation (GridMap) for this computation")


class ConvergenceError(DiffeoError):
    def __init__(self, message: str, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])


DOMAIN_SLACK = 1e-12


def as_float_array(x):
    """Return (array, was_scalar)."""
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr).copy(), arr.ndim == 0


def restore(values, scalar: bool):
    return float(values[0]) if scalar else values


@dataclass(frozen=True)
class Germ:
    """Generating vector field of a map near one endpoint.

    ``field`` and ``dlog`` take the distance to the endpoint (x for the
    left end, 1 - x for the right end) and return the field value and the
    derivative of its logarithm in that coordinate.  ``zone`` is the
    distance to the endpoint up to which the formula is exact.
    """

    zone: float
    field: Callable
    dlog: Callable
    kind: str = "exact"


def affine_germ(slope: float, zone: float) -> Germ:
    """Field of the affine germ y -> slope * y (in endpoint distance)."""
    lam = float(np.log(slope))
    return Germ(zone=float(zone),
                field=lambda y: lam * np.asarray(y, dtype=float),
                dlog=lambda y: 1.0 / np.asarray(y, dtype=float),
                kind="affine")


class Diffeo1D:
    """An orientation preserving homeomorphism of [0, 1].

    Subclasses implement ``_eval`` and ``_deriv`` on float arrays; the
    public methods accept scalars or arrays.
    """

    domain = "interval"

    # -- evaluation -------------------------------------------------------
    def __call__(self, x):
        arr, scalar = as_float_array(x)
        self._check_domain(arr)
        return restore(self._eval(arr), scalar)

    def deriv(self, x):
        arr, scalar = as_float_array(x)
        self._check_domain(arr)
        return restore(self._deriv(arr), scalar)

    def log_deriv(self, x):
        arr, scalar = as_float_array(x)
        self._check_domain(arr)
        return restore(self._log_deriv(arr), scalar)

    def affine_deriv(self, x):
        """Lf = D log Df, defined almost everywhere."""
        arr, scalar = as_float_array(x)
        self._check_domain(arr)
        return restore(self._affine_deriv(arr), scalar)

    def _eval(self, x):
        raise NotImplementedError

    def _deriv(self, x):
        return np.exp(self._log_deriv(x))

    def _log_deriv(self, x):
        d = self._deriv(x)
        if np.any(~(d > 0)):
            raise DiffeoError("derivative <= 0 detected")
        return np.log(d)

    def _affine_deriv(self, x):
        raise NotImplementedError(
            f"{type(self).__name__} does not provide an affine derivative")

    def _check_domain(self, arr):
        if arr.size and (np.nanmin(arr) < -DOMAIN_SLACK
                         or np.nanmax(arr) > 1 + DOMAIN_SLACK):
            raise DomainError("point outside [0, 1]")
        if np.any(np.isnan(arr)):
            raise DomainError("NaN input")

    # -- structure --------------------------------------------------------
    def inverse(self) -> "Diffeo1D":
        from .analytic import InverseMap
        return InverseMap(self)

    def reflected(self) -> "Diffeo1D":
        """The conjugate u -> 1 - f(1 - u), computed accurately near u = 0
        when the representation allows it."""
        from .analytic import ReflectedMap
        return ReflectedMap(self)

    def singular_points(self) -> np.ndarray:
        """Interior points where log Df may jump."""
        return np.empty(0)

    def germ(self, side: str) -> Germ | None:
        return None

    @property
    def has_affine_derivative(self) -> bool:
        try:
            self._affine_deriv(np.array([0.5]))
        except NotImplementedError:
            return False
        return True

    def log_multipliers(self) -> tuple[float, float]:
        """(log Df(0), log Df(1))."""
        v = self._log_deriv(np.array([0.0, 1.0]))
        return float(v[0]), float(v[1])

    def is_identity(self) -> bool:
        return False

    def to_spec(self) -> dict:
        raise NotImplementedError(
            f"{type(self).__name__} has no map-spec serialization")
