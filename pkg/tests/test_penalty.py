import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from proattn.penalty import Penalty, irls_weight, rho, rho_prime

from .conftest import ALL_PENALTIES, central_difference

EPS = 1e-6


def breakpoints(p):
    return {"huber": [p.delta], "mcp": [p.gamma], "huber_mcp": [p.delta, p.gamma]}.get(p.kind, [])


def test_rho_examples():
    assert rho(Penalty("mcp", gamma=4), 4.0) == 2.0
    assert rho(Penalty("l2"), 0.0) == 0.0
    assert rho(Penalty("huber", delta=1), 1.0) == 0.5
    hm = Penalty("huber_mcp", delta=1, gamma=4)
    for z in (4.0, 5.5, 100.0):
        assert rho(hm, z) == 2.0


def test_huber_mcp_plateau_matches_middle_branch_symbolically():
    z, d, g = sympy.symbols("z delta gamma", positive=True)
    middle = d * (z - d / 2 - (z - d) ** 2 / (2 * (g - d)))
    at_gamma = sympy.simplify(middle.subs(z, g))
    assert sympy.simplify(at_gamma - d * g / 2) == 0
    assert float(at_gamma.subs({d: 1, g: 4})) == 2.0
    # slope also vanishes at gamma
    assert sympy.simplify(sympy.diff(middle, z).subs(z, g)) == 0


def test_rho_prime_examples():
    mcp = Penalty("mcp", gamma=4)
    assert rho_prime(mcp, 4.0) == 0.0
    assert rho_prime(mcp, 9.0) == 0.0
    assert rho_prime(Penalty("l1"), 7.3) == 1.0
    huber = Penalty("huber", delta=1)
    fd = central_difference(lambda z: rho(huber, z), 0.25)
    assert fd == pytest.approx(0.25, abs=1e-8)
    assert rho_prime(huber, 0.25) == pytest.approx(fd, abs=1e-8)


def test_irls_weight_examples():
    assert irls_weight(Penalty("l2"), 3.7, EPS) == 0.5
    assert irls_weight(Penalty("l2"), 0.0, EPS) == 0.5
    assert irls_weight(Penalty("mcp", gamma=4), 8.0, EPS) == 0.0
    assert irls_weight(Penalty("l1"), 1.0, EPS) == 0.5
    huber = Penalty("huber", delta=1)
    fd = central_difference(lambda z: rho(huber, z), 0.5)
    assert irls_weight(huber, 0.5, EPS) == pytest.approx(fd / (2 * 0.5), abs=1e-8)
    assert irls_weight(huber, 0.5, EPS) == 0.5


@pytest.mark.parametrize("p", ALL_PENALTIES, ids=lambda p: p.kind)
def test_branch_continuity(p):
    h = 1e-7
    for b in breakpoints(p):
        # any jump would exceed the change a slope-bounded function can make
        slope = max(rho_prime(p, b - h), rho_prime(p, b))
        assert abs(rho(p, b - h) - rho(p, b + h)) <= 1e-9 + 2 * h * slope
        assert abs(rho(p, np.nextafter(b, 0)) - rho(p, b)) <= 1e-9


@pytest.mark.parametrize("p", ALL_PENALTIES, ids=lambda p: p.kind)
def test_derivative_matches_finite_difference(p):
    grid = np.linspace(EPS, 3 * p.gamma, 1000)
    for b in breakpoints(p):
        grid = grid[np.abs(grid - b) > 1e-4]
    grid = grid[grid > 1e-4]
    fd = np.array([central_difference(lambda z: rho(p, z), z) for z in grid])
    exact = rho_prime(p, grid)
    assert np.all(np.abs(exact - fd) <= 1e-6 * np.maximum(1.0, np.abs(exact)))


@pytest.mark.parametrize("p", ALL_PENALTIES, ids=lambda p: p.kind)
def test_weight_is_derivative_over_twice_residual(p):
    r = np.concatenate([[0.0, 1e-9, EPS], np.geomspace(1e-5, 50, 500)])
    safe = np.maximum(r, EPS)
    assert np.all(np.abs(irls_weight(p, r, EPS) - rho_prime(p, safe) / (2 * safe)) <= 1e-12)


@pytest.mark.parametrize("p", ALL_PENALTIES, ids=lambda p: p.kind)
def test_weight_nonincreasing(p):
    r = np.concatenate([np.linspace(0, 12, 5001), [p.delta, p.gamma]])
    r.sort()
    w = irls_weight(p, r, EPS)
    assert np.all(np.diff(w) <= 0)


@given(r=st.floats(min_value=0, max_value=1e6), gamma=st.floats(min_value=0.1, max_value=100))
def test_mcp_weight_hard_zero(r, gamma):
    mcp = Penalty("mcp", gamma=gamma)
    hm = Penalty("huber_mcp", delta=gamma / 2, gamma=gamma)
    if r >= gamma:
        assert irls_weight(mcp, r, EPS) == 0.0
        assert irls_weight(hm, r, EPS) == 0.0
    else:
        assert irls_weight(mcp, r, EPS) >= 0.0


@given(frac=st.floats(min_value=0, max_value=1), delta=st.floats(min_value=1e-3, max_value=10))
def test_huber_weight_is_half_inside_delta(frac, delta):
    r = max(EPS, frac * delta)
    assert irls_weight(Penalty("huber", delta=delta), r, EPS) == 0.5
    assert irls_weight(Penalty("huber_mcp", delta=delta, gamma=4 * delta), r, EPS) == 0.5


@settings(max_examples=200)
@given(st.sampled_from(ALL_PENALTIES), st.floats(min_value=0, max_value=1e3), st.floats(min_value=0, max_value=1e3))
def test_weight_monotone_pairs(p, a, b):
    lo, hi = min(a, b), max(a, b)
    assert irls_weight(p, hi, EPS) <= irls_weight(p, lo, EPS)


def test_closed_form_weights():
    r = np.linspace(0.01, 10, 200)
    d, g = 1.0, 4.0
    np.testing.assert_allclose(irls_weight(Penalty("l1"), r), 1 / (2 * r), rtol=1e-14)
    np.testing.assert_allclose(irls_weight(Penalty("huber", delta=d), r), 0.5 * np.minimum(1, d / r), rtol=1e-14)
    np.testing.assert_allclose(irls_weight(Penalty("mcp", gamma=g), r), 0.5 * np.maximum(1 / r - 1 / g, 0), atol=1e-15)
    expect = 0.5 * np.maximum(np.minimum(d / (g - d) * (g / r - 1), 1), 0)
    np.testing.assert_allclose(irls_weight(Penalty("huber_mcp", delta=d, gamma=g), r), expect, atol=1e-15)


def test_negative_residual_rejected():
    with pytest.raises(ValueError):
        rho(Penalty("l1"), -1.0)
    with pytest.raises(ValueError):
        rho_prime(Penalty("l1"), -1e-12)


@pytest.mark.parametrize(
    "kwargs",
    [dict(kind="huber", delta=0), dict(kind="mcp", gamma=-1), dict(kind="huber_mcp", delta=4, gamma=4), dict(kind="lp")],
)
def test_invalid_penalties(kwargs):
    with pytest.raises(ValueError):
        Penalty(**kwargs)


def test_defaults_and_json_round_trip():
    p = Penalty("huber_mcp")
    assert (p.delta, p.gamma) == (1.0, 4.0)
    assert Penalty.from_dict({"kind": "mcp", "gamma": 4.0}) == Penalty("mcp", gamma=4.0)
    for q in ALL_PENALTIES:
        assert Penalty.from_dict(q.to_dict()) == q
    with pytest.raises(ValueError):
        Penalty.from_dict({"kind": "mcp", "gama": 3})
