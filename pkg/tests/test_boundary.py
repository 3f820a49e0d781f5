import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import spindepth.boundary as bd
from oracles import F_integer_dense, F_point_dense, F_slsqp
from spindepth.boundary import (
    BoundaryCurve, CurveCache, GridSpec, compute_F_curve, compute_F_halfinteger, convexity_check, evaluate,
    evaluate_exact, g_from_f, load_curve, producibility_boundary, save_curve, tangent_bound, tilde_G,
)
from spindepth.errors import NonIntegerSpin, OutOfRange, SpinMismatch
from spindepth.spin import SpinLength


def G1(X):
    return 0.5 * (1 - np.sqrt(1 - X))


def test_j1_samples_match_closed_form(cache):
    F, G = cache.F(1), cache.G(1)
    np.testing.assert_allclose(G.value, G1(G.X), atol=1e-13)
    np.testing.assert_allclose(F.value, 0.5 * (1 - np.sqrt(1 - F.X**2)), atol=1e-13)


def test_half_spin_is_quadratic(cache):
    F = cache.F("1/2")
    np.testing.assert_allclose(F.value, F.X**2 / 2, atol=1e-12)


def test_samples_match_dense_oracle(cache):
    F = cache.F(3)
    for i in range(0, len(F), max(1, len(F) // 12)):
        X, v = F_point_dense(3, F.lam[i])
        assert F.X[i] == pytest.approx(X, abs=1e-11)
        assert F.value[i] == pytest.approx(v, abs=1e-11)


@settings(max_examples=30, deadline=None)
@given(X=st.floats(0.0, 0.999))
def test_evaluate_is_a_tight_lower_bound(cache, X):
    F = cache.F(3)
    exact = evaluate_exact(F, X)
    lo = evaluate(F, X)
    assert lo <= exact + 1e-12
    assert exact - lo < 1e-3


def test_evaluate_exact_matches_dense_root_solve(cache):
    for X in (0.05, 0.4, 0.93):
        assert evaluate_exact(cache.F(3), X) == pytest.approx(F_integer_dense(3, X), abs=1e-10)


def test_evaluate_edges(cache):
    G = cache.G(2)
    assert evaluate(G, 1.0) == 0.5 and evaluate(G, 0.0) == 0.0
    assert evaluate(G, np.array([[0.1, 0.2]])).shape == (1, 2)
    with pytest.raises(OutOfRange):
        evaluate(G, 1.01)
    with pytest.raises(OutOfRange):
        evaluate(G, -0.1)


@pytest.mark.parametrize("J", ["3/2", "5/2", 4, 7])
def test_sandwich_at_samples(cache, J):
    G = cache.G(J)
    assert np.all(tangent_bound(J, G.X) <= G.value + 1e-12)
    if SpinLength.of(J).is_integer:
        assert np.all(tilde_G(J, G.X) <= G.value + 1e-12)


@pytest.mark.parametrize("J,X", [("3/2", 0.5), ("3/2", 0.15), ("5/2", 0.3), ("5/2", 0.8)])
def test_half_integer_constrained_route(cache, J, X):
    ref = F_slsqp(SpinLength.of(J).J, X)
    assert compute_F_halfinteger(SpinLength.of(J), X) == pytest.approx(ref, abs=1e-8)
    # the sweep-based curve agrees with the constrained solve
    assert evaluate_exact(cache.F(J), X) == pytest.approx(ref, abs=1e-8)
    assert evaluate(cache.F(J), X) <= ref + 1e-12


def test_half_integer_sweep_needs_flag():
    with pytest.raises(NonIntegerSpin):
        compute_F_curve(SpinLength(3))


def test_half_integer_origin_slope(cache):
    # perturbatively G'(0) = J / (2J(J+1) - 1/2) for half-integer J
    for two_J in (3, 5, 9):
        J = two_J / 2
        G = cache.G(SpinLength(two_J))
        assert G.value[1] / G.X[1] == pytest.approx(J / (2 * J * (J + 1) - 0.5), rel=1e-3)


@pytest.mark.parametrize("J", [1, "3/2", 6])
def test_convexity(cache, J):
    rep = convexity_check(cache.G(J))
    assert rep.verdict and rep.max_derivative_decrease <= 1e-9
    probes = {p["alpha"]: p["convex"] for p in convexity_check(cache.F(J)).alpha_probe}
    assert probes == {1.5: True, 2.0: True, 2.5: False, 3.0: False, 4.0: False}


def test_producibility_boundary_endpoints(cache):
    b = producibility_boundary(200, SpinLength(1), 20, cache.G(10))
    assert b.second_moment_perp[0] == pytest.approx(1100)
    assert b.var_Jx[0] == 0
    assert b.second_moment_perp[-1] == pytest.approx(10100)
    assert b.var_Jx[-1] == pytest.approx(50)
    assert np.all(np.diff(b.second_moment_perp) > 0)
    with pytest.raises(SpinMismatch):
        producibility_boundary(200, SpinLength(1), 20, cache.G(9))
    with pytest.raises(ValueError):
        producibility_boundary(20, SpinLength(1), 20, cache.G(10))


def test_save_load_roundtrip_is_exact(tmp_path, cache):
    G = cache.G(5)
    save_curve(G, tmp_path / "g.json")
    H = load_curve(tmp_path / "g.json")
    for name in ("lam", "X", "value", "derivative"):
        assert np.array_equal(getattr(G, name), getattr(H, name))
    assert json.loads((tmp_path / "g.json").read_text())["version"] == bd.CACHE_VERSION


def test_disk_cache_hit_does_no_solves(tmp_path, monkeypatch):
    CurveCache(tmp_path).G(2)

    def boom(*a, **k):
        raise AssertionError("recomputed")

    monkeypatch.setattr(bd, "compute_F_curve", boom)
    c = CurveCache(tmp_path)
    c.G(2), c.F(2)
    assert c.misses == 0 and c.hits == 2


def test_grid_hash_keys_the_cache():
    assert GridSpec().hash() != GridSpec(resolution=0.01).hash()


def test_curve_validation():
    with pytest.raises(ValueError):
        BoundaryCurve(SpinLength(2), "F", [0, 1], [0.2, 0.1], [0, 0], [0, 0])
    with pytest.raises(ValueError):
        g_from_f(g_from_f(compute_F_curve(SpinLength(2))))
