import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from diffeo1d import (DiffeoError, MobiusFlow, PLMap, commutation_defect, compose, evaluate,
                      identity, invert, iterate, var_log_D)
from diffeo1d._base import BreakpointOverflow
from diffeo1d.circle import CircleLift, rotation_number
from diffeo1d.gallery import mobius, plx
from diffeo1d.grid import build_from_log_derivative

import oracles
from strategies import pl_maps

E = math.e


def _pair(f):
    return list(f.breakpoints), list(f.slopes)


# -- evaluation and inversion ------------------------------------------------------

def test_evaluate_mobius_closed_form():
    y, d = evaluate(mobius(), 0.5)
    assert y == pytest.approx(E / (E + 1), abs=1e-15)
    assert d == pytest.approx(E / (1 + (E - 1) / 2) ** 2, abs=1e-14)
    h = 1e-6
    fd = (oracles.mobius(1.0, 0.5 + h) - oracles.mobius(1.0, 0.5 - h)) / (2 * h)
    assert d == pytest.approx(fd, abs=1e-9)


def test_evaluate_plx_exact():
    assert evaluate(plx(), Fraction(1, 10)) == (Fraction(1, 5), Fraction(2))


def test_evaluate_identity():
    y, d = evaluate(identity(), 0.3)
    assert (y, d) == (0.3, 1.0)


def test_invert_plx_exact():
    assert invert(plx()).value_at(Fraction(1, 5)) == Fraction(1, 10)


def test_invert_mobius():
    assert float(invert(mobius())(0.7310586)) == pytest.approx(0.5, abs=1e-7)
    assert float(invert(mobius())(E / (E + 1))) == pytest.approx(0.5, abs=1e-12)


def test_invert_identity():
    assert invert(identity()).is_identity()


# -- composition and iteration ------------------------------------------------------

def test_iterate_plx_exact_orbit():
    f4 = iterate(plx(), 4)
    assert f4.value_at(Fraction(1, 10)) == Fraction(771875, 1000000)
    f = plx()
    x = Fraction(1, 10)
    for want in ("0.2", "0.4", "0.6125", "0.771875"):
        x = f.value_at(x)
        assert x == Fraction(want)


def test_iterate_mobius():
    assert float(iterate(mobius(), 2)(0.5)) == pytest.approx(E**2 / (E**2 + 1), abs=1e-13)


def test_iterate_zero_is_identity():
    assert iterate(plx(), 0).is_identity()
    assert iterate(mobius(), 0).is_identity()


def test_breakpoint_cap():
    with pytest.raises(BreakpointOverflow, match="grid"):
        iterate(plx(), 40, cap=50)


@given(pl_maps(), pl_maps())
def test_pl_composition_matches_fraction_oracle(f, g):
    h = compose(f, g)
    assert oracles.canonical(*_pair(h)) == oracles.pl_compose(_pair(f), _pair(g))


@given(pl_maps())
def test_pl_inverse_composes_to_identity(f):
    assert compose(f, f.inverse()).is_identity()
    assert compose(f.inverse(), f).is_identity()


@given(pl_maps(), st.integers(0, 32))
def test_pl_value_matches_oracle(f, i):
    x = Fraction(i, 32)
    assert f.value_at(x) == oracles.pl_value(*_pair(f), x)


# -- total variation of log Df -----------------------------------------------------

def test_var_plx():
    assert var_log_D(plx()) == pytest.approx(math.log(8 / 3) + math.log(3 / 2), abs=1e-15)
    assert var_log_D(plx()) == pytest.approx(math.log(4), abs=1e-15)


def test_var_mobius():
    assert var_log_D(mobius()) == pytest.approx(2.0, abs=1e-12)


def test_var_identity():
    assert var_log_D(identity()) == 0.0


@given(pl_maps())
def test_var_pl_is_jump_sum(f):
    assert var_log_D(f) == pytest.approx(oracles.pl_var(f.slopes), abs=1e-12)


@given(pl_maps(), pl_maps())
def test_var_subadditive(f, g):
    assert var_log_D(compose(f, g)) <= var_log_D(f) + var_log_D(g) + 1e-12


@given(pl_maps())
def test_var_inverse_invariant(f):
    assert var_log_D(f.inverse()) == pytest.approx(var_log_D(f), abs=1e-12)


@given(pl_maps(), st.integers(1, 8))
def test_var_power_bound(f, n):
    assert var_log_D(iterate(f, n)) <= n * var_log_D(f) + 1e-9


@given(st.floats(0.05, 0.95), st.floats(-3.0, 3.0))
def test_var_mobius_additive_and_above_endpoint_gap(c, t):
    f = MobiusFlow(t)
    whole = var_log_D(f)
    parts = var_log_D(f, (0.0, c)) + var_log_D(f, (c, 1.0))
    assert parts == pytest.approx(whole, abs=1e-9)
    lam, mu = f.log_multipliers()
    assert whole >= abs(mu - lam) - 1e-12


def test_negative_slope_rejected():
    with pytest.raises(DiffeoError, match="positive"):
        PLMap([0, Fraction(1, 2), 1], [Fraction(3), Fraction(-1)])


def test_pieces_must_cover_interval():
    with pytest.raises(DiffeoError, match="cover"):
        PLMap([0, Fraction(1, 2), 1], [Fraction(1), Fraction(3)])


# -- maps built from a log-derivative -------------------------------------------------

def test_build_zero_is_identity():
    g = build_from_log_derivative(lambda x: np.zeros_like(x))
    x = np.linspace(0, 1, 1001)
    assert np.max(np.abs(g(x) - x)) < 1e-14


def test_build_constant_is_identity():
    g = build_from_log_derivative(lambda x: np.full_like(x, 7.0))
    x = np.linspace(0, 1, 1001)
    assert np.max(np.abs(g(x) - x)) < 1e-13


def test_build_recovers_mobius():
    f = mobius()
    g = build_from_log_derivative(f._log_deriv, grid=np.linspace(0, 1, 4097))
    x = np.linspace(0, 1, 10001)
    assert np.max(np.abs(g(x) - f(x))) < 1e-8


def test_build_from_samples_recovers_mobius():
    f = mobius()
    grid = np.linspace(0, 1, 4097)
    g = build_from_log_derivative(f._log_deriv(grid), grid=grid)
    x = np.linspace(0, 1, 10001)
    assert np.max(np.abs(g(x) - f(x))) < 1e-8


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_grid_map_invariants(a, b):
    g = build_from_log_derivative(lambda x: a * np.sin(2 * np.pi * x) + b * x ** 2)
    assert g.y[0] == 0.0 and g.y[-1] == 1.0
    dy = np.diff(g.y)
    assert np.all(dy >= 0)
    # strict wherever the expected gap is resolvable next to 1.0
    resolvable = np.diff(g.x) * np.minimum(g.dy[1:], g.dy[:-1]) > 4 * np.spacing(1.0)
    assert np.all(dy[resolvable] > 0)
    mid = 0.5 * (g.x[1:] + g.x[:-1])
    assert np.all(g.deriv(mid) > 0)


# -- circle maps and commutation ---------------------------------------------------

def test_rotation_translation():
    assert rotation_number(CircleLift(PLMap.identity(), 0.3)) == 0.3


def test_rotation_pl_lift_fixing_zero():
    assert rotation_number(CircleLift(plx())) == 0.0


def test_rotation_sine_against_long_run():
    F = CircleLift(__import__("diffeo1d.analytic", fromlist=["SineMap"]).SineMap(0.1), 0.5)
    main = rotation_number(F)
    long = rotation_number(F, iterations=10 * 2**16)
    assert abs(main - long) < 1e-6


def test_commutation_powers_exact():
    assert commutation_defect(plx(), iterate(plx(), 2)) == 0.0


def test_commutation_same_flow():
    assert commutation_defect(mobius(), MobiusFlow(0.5)) < 1e-9


def test_commutation_unrelated():
    assert commutation_defect(mobius(), plx()) > 0.01


def test_sampled_var_counts_midpoint_kink_once():
    from diffeo1d.analytic import Composition
    f = PLMap([Fraction(0), Fraction(1, 2), Fraction(1)], [Fraction(3, 2), Fraction(1, 2)])
    assert var_log_D(Composition([f, PLMap.identity()])) == pytest.approx(math.log(3), abs=1e-9)
