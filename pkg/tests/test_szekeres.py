import math

import numpy as np
import pytest

from diffeo1d import DiffeoError, MobiusFlow, PLMap, commutation_defect, szekeres_field
from diffeo1d._base import ConvergenceError
from diffeo1d.gallery import gallery, mobius, parabolic_flow, plx
from diffeo1d.szekeres import l1_bound, variation_bound

import oracles

E = math.e
GALLERY = ("mobius", "plx", "parabolic", "sternberg", "parabolic-witness", "linearized-mobius")


@pytest.fixture(scope="module")
def mob_field():
    return szekeres_field(mobius(), seed="standard")


@pytest.fixture(scope="module")
def fields():
    return {name: szekeres_field(gallery(name)) for name in GALLERY}


def test_mobius_field_value(mob_field):
    assert float(mob_field(0.5)) == pytest.approx(0.25, abs=1e-8)
    x = np.linspace(0.01, 0.99, 99)
    assert np.max(np.abs(mob_field(x) - x * (1 - x))) < 1e-8


def test_mobius_normalizer(mob_field):
    assert szekeres_field(mobius()).c0 == mob_field.c0
    assert mob_field.c0 == pytest.approx(1 / (E - 1), abs=1e-15)
    assert mob_field.c0 == pytest.approx(0.5819767, abs=1e-7)


def test_parabolic_field_is_flat_at_zero():
    vf = szekeres_field(parabolic_flow())
    assert vf.c0 == 1.0
    x = np.array([1e-2, 1e-3, 1e-4])
    ratios = vf(x) / x
    assert np.all(np.diff(ratios) < 0) and ratios[-1] < 1e-3


def test_mobius_chart(mob_field):
    ch = mob_field.chart(0.5)
    assert float(ch.P(E / (E + 1))) == pytest.approx(1.0, abs=1e-10)
    assert float(ch.P(0.5)) == pytest.approx(0.0, abs=1e-14)
    assert float(ch.psi(-1.0)) == pytest.approx(1 / (1 + E), abs=1e-10)
    x = np.linspace(0.05, 0.95, 19)
    assert np.max(np.abs(ch.P(x) - np.log(x / (1 - x)))) < 1e-9


def test_mobius_flow_maps(mob_field):
    assert float(mob_field.flow_map(0.5)(0.5)) == pytest.approx(math.sqrt(E) / (1 + math.sqrt(E)),
                                                                abs=1e-10)
    assert float(mob_field.flow_map(1.0)(0.5)) == pytest.approx(0.7310586, abs=1e-7)
    assert mob_field.flow_map(0).is_identity()
    x = np.linspace(0, 1, 101)
    for t in (-1.5, 0.3, 2.5):
        want = np.array([oracles.mobius(t, v) for v in x])
        assert np.max(np.abs(mob_field.flow_map(t)(x) - want)) < 1e-9


@pytest.mark.parametrize("name", GALLERY)
def test_field_sign_and_invariance(fields, name):
    vf = fields[name]
    x = np.linspace(1e-3, 1 - 1e-3, 201)
    # the field points the way the map moves points
    assert np.all(np.sign(vf(x)) == np.sign(vf.f(x) - x))
    assert vf.invariance_residual() < 1e-6


@pytest.mark.parametrize("name", GALLERY)
def test_chart_translates_by_one(fields, name):
    vf = fields[name]
    f = vf.f
    ch = vf.chart(0.5)
    x = np.linspace(0.2, 0.6, 9)
    assert np.max(np.abs(ch.P(f(x)) - ch.P(x) - 1.0)) < 1e-7
    a = 0.5
    lo, hi = a, a
    for _ in range(3):
        lo = float(f.inverse()(lo))
        hi = float(f(hi))
    y = np.linspace(lo, hi, 41)
    assert np.max(np.abs(ch.psi(ch.P(y)) - y)) < 1e-10
    assert float(ch.P(a)) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("name", GALLERY)
def test_szekeres_constant(fields, name):
    tau = fields[name].szekeres_constant()
    assert tau.size == 10
    assert np.max(np.abs(tau - 1.0)) < 1e-7


def test_sternberg_field_closed_form(fields):
    from diffeo1d.gallery import sternberg_field
    vf = fields["sternberg"]
    x = np.geomspace(1e-9, 1e-2, 15)
    assert np.max(np.abs(vf(x) / sternberg_field(-1.0, x) - 1)) < 1e-6


@pytest.mark.parametrize("name", ("mobius", "plx", "linearized-mobius"))
def test_field_slope_at_hyperbolic_end(fields, name):
    vf = fields[name]
    lam = vf.multiplier()
    x = np.array([1e-7])
    assert float(vf(x)[0] / x[0]) == pytest.approx(lam, rel=1e-3)


@pytest.mark.parametrize("name", ("mobius", "parabolic", "linearized-mobius"))
@pytest.mark.parametrize("t", [1 / 3, 0.5, 2.0])
def test_flow_commutes_with_map(fields, name, t):
    vf = fields[name]
    assert commutation_defect(vf.flow_map(t), vf.f) < 1e-6


@pytest.mark.parametrize("name", ("mobius", "plx", "linearized-mobius", "sternberg"))
@pytest.mark.parametrize("c", [0.05, 0.1, 0.2])
def test_variation_bound(fields, name, c):
    assert variation_bound(fields[name], c, 1e-6)["holds"]


@pytest.mark.parametrize("name", ("mobius", "linearized-mobius", "parabolic"))
@pytest.mark.parametrize("c", [0.05, 0.1, 0.2])
def test_l1_bound(fields, name, c):
    assert l1_bound(fields[name], c, 1e-6)["holds"]


def test_anchor_independence():
    f = gallery("linearized-mobius")
    a = szekeres_field(f)
    b = szekeres_field(f, anchor=0.3)
    x = np.linspace(0.05, 0.95, 37)
    assert np.max(np.abs(a(x) / b(x) - 1)) < 1e-7


def test_right_field_of_flow_matches_left():
    left = szekeres_field(MobiusFlow(0.7))
    right = szekeres_field(MobiusFlow(0.7), side="right")
    x = np.linspace(0.05, 0.95, 19)
    assert np.max(np.abs(left(x) - right(x))) < 1e-8


def test_left_and_right_fields_differ_for_pl():
    left = szekeres_field(plx())
    right = szekeres_field(plx(), side="right")
    x = np.linspace(0.3, 0.7, 9)
    assert np.max(np.abs(left(x) / right(x) - 1)) > 1e-3


def test_decreasing_map_gives_negative_field():
    vf = szekeres_field(mobius().inverse())
    assert np.all(vf(np.linspace(0.1, 0.9, 9)) < 0)
    assert float(vf.flow_map(1.0)(0.5)) == pytest.approx(oracles.mobius(-1.0, 0.5), abs=1e-9)


def test_interior_fixed_point_rejected():
    from fractions import Fraction
    f = PLMap([0, Fraction(1, 4), Fraction(3, 4), 1],
              [Fraction(2), Fraction(1, 5), Fraction(8, 5)])
    with pytest.raises(DiffeoError, match="fixed point"):
        szekeres_field(f)


def test_convergence_error_carries_history():
    with pytest.raises(ConvergenceError) as info:
        szekeres_field(gallery("parabolic-witness"), tol=1e-15, max_iter=2)
    assert len(info.value.diagnostics) == 2
