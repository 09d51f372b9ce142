import importlib
import math

import numpy as np
import pytest

from diffeo1d import PLMap, asymptotic_distortion, var_log_D
from diffeo1d.mather import mather_diffeo, mather_homomorphism

import oracles

G = importlib.import_module("diffeo1d.gallery")
LOG2 = math.log(2.0)


def test_names_resolve():
    for name in G.names():
        assert G.gallery(name) is not None
    with pytest.raises(KeyError, match="known"):
        G.gallery("nope")


def test_every_fixture_has_a_record():
    assert set(G.records()) == set(G.names())


@pytest.mark.parametrize("name, var, dist", [
    ("identity", 0.0, 0.0), ("mobius", 2.0, 2.0), ("plx", 2 * LOG2, 2 * LOG2),
])
def test_closed_form_records(name, var, dist):
    rec = G.record(name)
    assert rec["source"] == "closed form"
    assert rec["var"] == pytest.approx(var, abs=1e-15)
    assert rec["dist"] == pytest.approx(dist, abs=1e-15)
    assert var_log_D(G.gallery(name)) == pytest.approx(var, abs=1e-12)


def test_plx_record_mather():
    rec = G.record("plx")
    assert rec["var_DM"] == pytest.approx(4 * LOG2, abs=1e-12)
    assert not rec["mather_trivial"]
    assert mather_diffeo(G.plx()).var == pytest.approx(rec["var_DM"], abs=1e-4)


@pytest.mark.parametrize("name", ["linearized-mobius", "parabolic", "parabolic-witness"])
def test_computed_records_reproduce(name):
    rec = G.record(name)
    f = G.gallery(name)
    assert var_log_D(f) == pytest.approx(rec["var"], abs=1e-9)
    assert asymptotic_distortion(f).value == pytest.approx(rec["dist"], abs=1e-6)
    assert mather_homomorphism(f) == pytest.approx(rec["phi_M"], abs=1e-6)
    assert list(f.log_multipliers()) == pytest.approx(rec["multipliers"], abs=1e-12)


def test_record_dist_never_exceeds_var():
    for name, rec in G.records().items():
        if "var" in rec and "dist" in rec:
            assert rec["dist"] <= rec["var"] + 1e-6, name


def test_pair_records():
    assert G.record("mobius-pair")["dist"] == [2.0, 1.0]
    a, b = G.gallery("plx-pair")
    assert isinstance(b, PLMap) and b.exact
    assert G.record("plx-pair")["dist"][1] == pytest.approx(var_log_D(b), abs=1e-12)


# -- the implicit germ -------------------------------------------------------------------

def test_sternberg_value_against_decimal():
    y = G.sternberg_eval(-1.0, 0.1)
    ref = float(oracles.sternberg_decimal(-1, 0.1))
    assert y == pytest.approx(ref, rel=1e-14)
    assert y == pytest.approx(0.02616, abs=1e-5)
    resid = G._phi(y) - math.exp(-1.0) * G._phi(0.1)
    assert abs(float(resid)) < 1e-13


def test_sternberg_ratio_sequence():
    r = [G.sternberg_ratio(-1.0, 0.1, k)["ratio"] for k in (0, 1, 5, 10)]
    assert r[0] == 1.0
    assert r[1] == pytest.approx(0.711, abs=2e-3)
    assert r[3] < r[2] < r[1]


def test_sternberg_telescoping():
    for k in (1, 3, 7):
        d = G.sternberg_ratio(-1.0, 0.1, k)
        assert d["ratio"] == pytest.approx(d["telescoped"], rel=1e-12)
        assert d["lipschitz_lower_bound"] == pytest.approx(1 / math.sqrt(d["ratio"]))


def test_sternberg_map_matches_germ():
    f = G.gallery("sternberg")
    x = np.geomspace(1e-6, 0.3, 50)
    assert np.max(np.abs(f(x) / G.sternberg_eval(-1.0, x) - 1)) < 1e-13


def test_sternberg_needs_contracting_multiplier():
    with pytest.raises(Exception, match="lam < 0"):
        G.sternberg_eval(0.5, 0.1)


def test_random_pl_is_deterministic():
    a = G.random_pl(np.random.default_rng(7), pieces=4)
    b = G.random_pl(np.random.default_rng(7), pieces=4)
    assert a == b and a.exact
    x = np.linspace(0.01, 0.99, 99)
    assert np.all(a(x) > x)
