import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from diffeo1d import DiffeoError, MobiusFlow, PLMap, commutation_defect, var_log_D
from diffeo1d.circle import CircleLift, LiftComposition
from diffeo1d.gallery import circle_sine, gallery, linearized_mobius, mobius, plx
from diffeo1d.grid import build_from_log_derivative, identity_grid_map
from diffeo1d.core import iterate
from diffeo1d.paths import (AlphaConjugate, alpha_conjugate, alpha_norm_bound,
                            box_average_conjugator, circle_average, deform, geometric_interp,
                            linear_log_homotopy, path_report, rotation_gap, sample_path,
                            staged_alpha_scheme, sup_gap)

from strategies import fp_free_pl

LOG2 = math.log(2.0)
X = np.linspace(0, 1, 2001)


# -- circle averaging ------------------------------------------------------------------

def test_translations_are_fixed():
    R = CircleLift(PLMap.identity(), 0.3)
    S = CircleLift(PLMap.identity(), 0.7)
    phi, lifts = circle_average((R, S), 8)
    assert np.max(np.abs(phi(X) - X - (phi(0.0) - 0.0))) < 1e-12
    assert rotation_gap(lifts[0], 0.3) == 0.0 and rotation_gap(lifts[1], 0.7) == 0.0


def test_sine_gap_shrinks():
    F = circle_sine()
    g8 = rotation_gap(circle_average((F,), 8)[1][0], 0.5)
    g32 = rotation_gap(circle_average((F,), 32)[1][0], 0.5)
    assert g32 < g8


def test_simultaneous_conjugation_keeps_commutation():
    F = circle_sine()
    F2 = LiftComposition([F, F])
    _, (A, B) = circle_average((F, F2), 8)
    assert commutation_defect(A, B) < 1e-9


# -- box averaging ------------------------------------------------------------------------

def test_box_one_is_identity():
    g, conj = box_average_conjugator((mobius(),), 1)
    assert np.max(np.abs(g(X) - X)) == 0.0
    assert conj[0] is not None and sup_gap(conj[0], mobius()) == 0.0


def test_box_mobius():
    _, (c,) = box_average_conjugator((mobius(),), 16)
    assert var_log_D(c) <= 2.0 + 1e-6


def test_box_plx_32():
    f = plx()
    _, (c,) = box_average_conjugator((f,), 32)
    bound = var_log_D(iterate(f, 32)) / 32
    assert var_log_D(c) <= bound + 1e-6
    assert abs(bound - 2 * LOG2) < 1e-3


def test_box_pair_keeps_commutation():
    _, (a, b) = box_average_conjugator(gallery("mobius-pair"), 8)
    assert commutation_defect(a, b) < 1e-6


# -- geometric interpolation ---------------------------------------------------------------

@pytest.fixture(scope="module")
def bump():
    return build_from_log_derivative(lambda x: 0.6 * np.sin(2 * np.pi * x))


def test_interp_endpoints(bump):
    ident = identity_grid_map()
    assert np.max(np.abs(geometric_interp(ident, bump, 0.0)(X) - X)) < 1e-8
    assert np.max(np.abs(geometric_interp(ident, bump, 1.0)(X) - bump(X))) < 1e-8


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_interp_conjugates_stay_below_endpoints(bump, s):
    from diffeo1d.analytic import Composition
    f = mobius()

    def conj(g):
        return var_log_D(Composition([g, f, g.inverse()]))

    ident = identity_grid_map()
    gs = geometric_interp(ident, bump, s)
    assert conj(gs) <= max(conj(ident), conj(bump)) + 1e-6


# -- homotopy --------------------------------------------------------------------------------

def test_homotopy_ends():
    assert linear_log_homotopy(mobius(), 0.0) is not None
    assert sup_gap(linear_log_homotopy(mobius(), 0.0), mobius()) == 0.0
    assert linear_log_homotopy(mobius(), 1.0).is_identity()


def test_homotopy_half():
    assert var_log_D(linear_log_homotopy(mobius(), 0.5)) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=25)
@given(fp_free_pl(), st.floats(0.0, 1.0))
def test_homotopy_law_pl(f, t):
    assert var_log_D(linear_log_homotopy(f, t)) == pytest.approx((1 - t) * var_log_D(f),
                                                                  abs=1e-9)


# -- multiplier change -----------------------------------------------------------------------

def test_alpha_one_is_identity_operation():
    assert alpha_conjugate(plx(), 1.0) is plx() or sup_gap(alpha_conjugate(plx(), 1.0), plx()) == 0


def test_alpha_half_plx():
    h = alpha_conjugate(plx(), 0.5, eps=0.125)
    assert math.exp(h.log_multipliers()[0]) == pytest.approx(math.sqrt(2), abs=1e-12)
    d = 1e-8
    fd = float(h(np.array([d]))[0]) / d
    assert fd == pytest.approx(math.sqrt(2), abs=1e-7)


def test_alpha_quarter_linearized_mobius():
    h = alpha_conjugate(linearized_mobius(), 0.25)
    lam, _ = h.log_multipliers()
    assert math.exp(lam) == pytest.approx(math.exp(0.25), abs=1e-12)


def test_alpha_rejects_non_affine_end():
    with pytest.raises(DiffeoError):
        alpha_conjugate(mobius(), 0.5, side="left")


@settings(max_examples=25)
@given(fp_free_pl(denom=16), st.floats(0.1, 1.0))
def test_alpha_norm_bound_holds(f, beta):
    try:
        h = alpha_conjugate(f, beta)
    except DiffeoError:
        return
    if h is f:
        return
    assert var_log_D(h) <= alpha_norm_bound(f, beta, h.eps) + 1e-6


# -- paths and the report -------------------------------------------------------------------

def test_homotopy_path_report():
    path = deform((mobius(),), "homotopy", samples=33)
    rep = path_report(path)
    assert rep["holds"]
    assert rep["max_var"][0] == pytest.approx(2.0, abs=1e-9)
    assert rep["argmax_t"][0] == 0.0
    v = path.var[:, 0]
    assert np.max(np.abs(v - 2.0 * (1 - path.times))) < 1e-8


def test_constant_path_has_zero_modulus():
    f = plx()
    path = sample_path(lambda t: (f,), (f,), "geometric-interp", [var_log_D(f)], samples=9)
    rep = path_report(path)
    assert rep["continuity_modulus"] == 0.0 and rep["holds"]


def test_average_then_homotopy_plx():
    path = deform((plx(),), "scheme34", samples=17)
    rep = path_report(path)
    assert rep["holds"]
    assert rep["max_var"][0] <= 2 * var_log_D(plx()) + 1e-6


@pytest.mark.parametrize("method, action", [
    ("box-average", "mobius-pair"), ("homotopy", "plx-pair"), ("alpha", "plx"),
])
def test_paths_start_at_input_and_commute(method, action):
    act = gallery(action)
    act = act if isinstance(act, tuple) else (act,)
    rep = path_report(deform(act, method, samples=9))
    assert rep["endpoint_gap"] < 1e-8
    assert rep["commutation_defect"] < 1e-5
    assert rep["holds"]


def test_budget_violation_is_reported():
    f = plx()
    path = sample_path(lambda t: (f,), (f,), "geometric-interp", [0.5 * var_log_D(f)], samples=3)
    rep = path_report(path)
    assert not rep["holds"]
    assert [c["name"] for c in rep["checks"] if not c["holds"]] == ["budget[0]"]


def test_staged_scheme_records():
    path, stages = staged_alpha_scheme(linearized_mobius(), alpha=0.25, stages=2, samples=5)
    assert [s["stage"] for s in stages] == [1, 2]
    assert all(s["holds"] for s in stages)
    assert stages[1]["bound"] == pytest.approx(0.25 * 2.0)
    assert path_report(path)["holds"]


def test_staged_scheme_rejects_parabolic_end():
    with pytest.raises(DiffeoError, match="hyperbolic"):
        staged_alpha_scheme(gallery("parabolic"), stages=1)
