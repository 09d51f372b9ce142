import math

import numpy as np
import pytest
from hypothesis import given, settings

from diffeo1d import FlowMap, MobiusFlow, fundamental_check, mather_diffeo, mather_homomorphism
from diffeo1d.analytic import Composition
from diffeo1d.gallery import gallery, mobius, parabolic_flow, parabolic_witness, plx
from diffeo1d.grid import build_from_log_derivative
from diffeo1d.mather import (PreconditionError, admissible_depths, mather_variation,
                             rotation_quotient_distance)

from strategies import fp_free_pl

LOG2 = math.log(2.0)


@pytest.fixture(scope="module")
def sternberg_invariant():
    return mather_diffeo(gallery("sternberg"))


def test_mobius_trivial_at_fixed_depths():
    M = mather_diffeo(mobius(), 0.5, 8, 8)
    assert M.var < 1e-6 and M.trivial
    assert mather_variation(M) == M.var


def test_depth_precondition_names_smallest():
    m, n = admissible_depths(mobius(), 0.5)
    with pytest.raises(PreconditionError) as info:
        mather_diffeo(mobius(), 0.5, m - 1, n)
    assert (info.value.m, info.value.n) == (m, n)
    assert f"m={m}, n={n}" in str(info.value)


def test_plx_invariant_variation():
    M = mather_diffeo(plx(), 0.1)
    assert M.var == pytest.approx(4 * LOG2, abs=1e-4)
    assert not M.trivial


def test_plx_sampled_matches_exact():
    M = mather_diffeo(plx(), 0.5, method="sampled")
    assert M.method == "sampled"
    assert M.var == pytest.approx(4 * LOG2, abs=1e-4)


@pytest.mark.parametrize("f", [MobiusFlow(0.4), MobiusFlow(-2.0), parabolic_flow(),
                               FlowMap([0, 0.5, 0.5, -1.0], 0.8)],
                         ids=["mob-0.4", "mob-inverse", "parabolic", "cubic-field"])
def test_time_maps_of_fields_are_trivial(f):
    assert mather_diffeo(f).trivial


def test_sternberg_invariant_nontrivial(sternberg_invariant):
    assert sternberg_invariant.var > 0.1


def test_lift_commutes_with_translation(sternberg_invariant):
    M = sternberg_invariant
    t = np.linspace(-1.0, 2.0, 61)
    assert np.max(np.abs(M(t + 1) - M(t) - 1)) < 1e-12
    assert np.all(np.diff(M(np.linspace(0, 1, 1001))) > 0)


def test_base_point_changes_rotations_only():
    f = gallery("sternberg")
    h = f if float(f(0.5)) > 0.5 else f.inverse()
    a0 = 0.5
    a1 = 0.5 * (a0 + float(h(a0)))
    d = rotation_quotient_distance(mather_diffeo(f, a0), mather_diffeo(f, a1))
    assert d < 1e-5


def test_conjugacy_invariance():
    # a smooth conjugator that is the identity near both ends
    h = build_from_log_derivative(lambda x: 0.8 * np.sin(2 * np.pi * x) ** 3)
    f = plx()
    conj = Composition([h, f, h.inverse()])
    a = mather_diffeo(f, method="sampled").var
    b = mather_diffeo(conj).var
    assert b == pytest.approx(a, abs=1e-4)


# -- fundamental relations ----------------------------------------------------------

def test_fundamental_mobius():
    r = fundamental_check(mobius())
    assert r["lhs"] == pytest.approx(2.0, abs=1e-6)
    assert r["rhs"] == pytest.approx(2.0, abs=1e-15)
    assert r["holds"]


def test_fundamental_plx():
    r = fundamental_check(plx())
    assert r["equality_residual"] < 1e-4
    assert r["var_dm"] == pytest.approx(4 * LOG2, abs=1e-12)
    assert r["lower_bound_holds"]


def test_fundamental_flat_flow():
    # time map of x^2 (1 - x)^2: parabolic at both ends
    r = fundamental_check(FlowMap([0, 0, 1, -2, 1], 0.3))
    assert r["lhs"] < 1e-6 and r["rhs"] == 0.0 and r["holds"]


@settings(max_examples=25, deadline=None)
@given(fp_free_pl())
def test_pl_equality_and_lower_bound(f):
    r = fundamental_check(f, dist=None)
    assert r["equality_residual"] < 1e-9
    assert r["lower_bound_holds"]


@settings(max_examples=15, deadline=None)
@given(fp_free_pl())
def test_pl_exact_and_sampled_variations_agree(f):
    exact = mather_diffeo(f, 0.5).var
    sampled = mather_diffeo(f, 0.5, method="sampled").var
    assert sampled == pytest.approx(exact, abs=1e-4)


# -- Mather homomorphism --------------------------------------------------------------

def test_phi_pl_zero():
    assert mather_homomorphism(plx()) == 0.0


def test_phi_mobius():
    assert mather_homomorphism(mobius()) == pytest.approx(-2.0, abs=1e-9)


def test_phi_mobius_square():
    assert mather_homomorphism(Composition([mobius(), mobius()])) == pytest.approx(-4.0, abs=1e-8)


def test_phi_inverse():
    assert mather_homomorphism(mobius().inverse()) == pytest.approx(2.0, abs=1e-9)


def test_phi_nonzero_witness_has_nontrivial_invariant():
    f = parabolic_witness()
    assert abs(mather_homomorphism(f)) > 0.1
    assert mather_diffeo(f).var > 0.01
