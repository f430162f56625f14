import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capstab import spaceform as sf
from capstab.errors import ArgumentError, DomainError
from conftest import ball

E1, E2, E3 = np.eye(3)


def _interior_points(rng, b, n):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1)[:, None]
    r = b.radius_model * 0.95 * rng.random(n) ** (1 / 3)
    return d * r[:, None]


@pytest.mark.parametrize("space", ["euclidean", "hyperbolic", "spherical"])
def test_killing_pairing_with_position_is_potential(space, rng):
    b = ball(space, 1.0)
    X = _interior_points(rng, b, 100)
    for a in np.eye(3):
        Y = sf.killing_y(b.kappa, X, a)
        lhs = sf.metric_pair(b.kappa, X, Y, X)
        assert np.max(np.abs(lhs - sf.potential_va(b.kappa, X, a))) <= 1e-10


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-0.6, 0.6), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) < 0.9),
       st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
       st.sampled_from([-1, 0, 1]))
def test_killing_pairing_property(x, a, k):
    x, a = np.array(x), np.array(a) / np.linalg.norm(a)
    y = sf.killing_y(k, x, a)
    assert sf.metric_pair(k, x, y, x) == pytest.approx(sf.potential_va(k, x, a), rel=1e-12, abs=1e-12)


def test_hyperbolic_point_values():
    b = ball("hyperbolic", 2.0)
    assert sf.evaluate_field(b, sf.AmbientField("potential_V0"), np.zeros(3)) == 1.0
    y = sf.evaluate_field(b, sf.AmbientField("killing_Y", (1.0, 0.0, 0.0)), np.zeros(3))
    np.testing.assert_allclose(y, [0.5, 0.0, 0.0])
    va = sf.evaluate_field(b, sf.AmbientField("potential_Va", (1.0, 0.0, 0.0)), np.array([0.5, 0.0, 0.0]))
    assert va == pytest.approx(4.0 / 3.0, abs=1e-15)


def test_v0_is_cosh_of_distance():
    # hyperbolic distance from the origin in the Poincare ball is 2 artanh |x|
    x = np.array([0.3, -0.2, 0.1])
    r = 2 * np.arctanh(np.linalg.norm(x))
    assert sf.potential_v0(-1, x) == pytest.approx(np.cosh(r), rel=1e-14)
    r = 2 * np.arctan(np.linalg.norm(x))
    assert sf.potential_v0(1, x) == pytest.approx(np.cos(r), rel=1e-14)


@pytest.mark.parametrize("space,a,x", [
    ("euclidean", E1, [0.2, 0.4, -0.1]),
    ("hyperbolic", E1, [0.3, 0.1, 0.0]),
    ("spherical", E2, [0.2, 0.0, 0.4]),
])
def test_killing_residual_vanishes(space, a, x):
    b = ball(space, 2.0)
    f = sf.AmbientField("killing_Y", tuple(a))
    for z, w in [(E1, E2), (E1, E1), (E2, E3), (np.array([1.0, 2.0, -1.0]), E3)]:
        assert abs(sf.killing_residual(b, f, x, (z, w))) <= 1e-8


@pytest.mark.parametrize("space", ["hyperbolic", "spherical"])
def test_position_field_is_conformal_not_killing(space):
    # nabla x = V0 g: symmetrized derivative equals V0 g(z, z)
    b = ball(space, 1.0)
    x = np.array([0.2, 0.1, -0.15])
    val = sf.symmetrized_derivative(b, sf.AmbientField("position_x"), x, (E1, E1))
    expect = sf.potential_v0(b.kappa, x) * sf.metric_pair(b.kappa, x, E1, E1)
    assert val == pytest.approx(expect, rel=1e-8)
    assert abs(val) > 0.1


def test_curvature_constants():
    x, nu = np.zeros(3), E3
    c0 = sf.ambient_curvature(ball("euclidean"))
    assert c0.ric(ball("euclidean"), x, nu) == 0.0 and c0.scalar == 0.0
    bh = ball("hyperbolic", 1.0)
    unit = nu / sf.conformal_lambda(-1, x)
    assert sf.ambient_curvature(bh).ric(bh, x, unit) == pytest.approx(-2.0)
    bs = ball("spherical", 1.0)
    cs = sf.ambient_curvature(bs)
    assert cs.ric(bs, x, nu / sf.conformal_lambda(1, x)) == pytest.approx(2.0)
    assert cs.scalar == 6.0


@pytest.mark.parametrize("space,R,p", [
    ("euclidean", 1.5, 1 / 1.5),
    ("hyperbolic", 1.0, 1 / np.tanh(1.0)),
    ("spherical", 1.0, 1 / np.tan(1.0)),
    ("spherical", 2.0, 1 / np.tan(2.0)),
])
def test_boundary_sphere_curvature(space, R, p):
    b = ball(space, R)
    assert b.boundary_curvature == pytest.approx(p, rel=1e-14)
    x = b.radius_model * np.array([0.6, 0.0, 0.8])
    t = np.array([0.8, 0.0, -0.6])
    assert sf.boundary_normal_curvature(b, x, t) == pytest.approx(p, rel=1e-7)


def test_model_radius():
    assert ball("hyperbolic", 1.0).radius_model == pytest.approx(np.tanh(0.5))
    assert ball("spherical", 1.0).radius_model == pytest.approx(np.tan(0.5))


def test_errors():
    b = ball("hyperbolic", 1.0)
    with pytest.raises(DomainError):
        sf.evaluate_field(b, sf.AmbientField("potential_V0"), [0.9, 0.0, 0.0])
    f = sf.AmbientField("killing_Y", (1.0, 0.0, 0.0))
    with pytest.raises(ArgumentError):
        sf.killing_residual(b, f, np.zeros(3), (np.zeros(3), E1))
    with pytest.raises(ArgumentError):
        sf.AmbientField("killing_Y", (1.0, 1.0, 0.0))
    with pytest.raises(ArgumentError):
        sf.AmbientSpace.from_name("lorentzian")
    with pytest.raises(ArgumentError):
        sf.AmbientBall(sf.AmbientSpace(1), 3.5)
    with pytest.raises(ArgumentError):
        sf.AmbientBall(sf.AmbientSpace(0), -1.0)
