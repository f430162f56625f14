import dataclasses

import numpy as np
import pytest

from capstab import identities as ids
from capstab.errors import PreconditionError
from capstab.surface import Immersion, boundary_frame
from conftest import assembly, ball, surface

E1, E2, E3 = ids.AXES
CATENOID = ("euclidean", 1.0, "catenoid")


def spec(a):
    return ids.TestFunctionSpec(a)


def test_flat_disk_admissibility():
    r = ids.check_admissibility(surface("euclidean", 1.0, "flat_disk", c=0.0), spec(E1))
    assert abs(r.details["boundary_integral"]) <= 1e-10
    assert r.passed


@pytest.mark.parametrize("a", ids.AXES)
def test_catenoid_admissibility(a):
    r = ids.check_admissibility(surface(*CATENOID, critical=True), spec(a))
    assert r.residual_max <= 1e-8


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_hyperbolic_admissibility(R):
    r = ids.check_admissibility(surface("hyperbolic", R, "geodesic_disk", offset=0.0), spec(E1))
    assert r.residual_max <= 1e-8


def test_boundary_identity_examples():
    assert ids.check_boundary_identity(surface("euclidean", 1.0, "flat_disk", c=0.5), spec(E1)).residual_max <= 1e-8
    for a in ids.AXES:
        assert ids.check_boundary_identity(surface(*CATENOID, critical=True), spec(a)).residual_max <= 1e-7
    r = ids.check_boundary_identity(surface("hyperbolic", 1.5, "geodesic_disk", offset=0.0), spec(E2))
    assert r.residual_max <= 1e-7
    assert r.details["q_mean"] == pytest.approx(1 / np.tanh(1.5), rel=1e-12)


@pytest.mark.parametrize("c", [0.0, 0.3, -0.5])
def test_flat_interior_identities_vanish(c):
    for a in ids.AXES:
        assert ids.check_interior_identity(surface("euclidean", 1.0, "flat_disk", c=c), spec(a)).residual_max <= 1e-12


def test_curved_interior_identities():
    r = ids.check_interior_identity(surface(*CATENOID, critical=True), spec(E1))
    assert r.residual_max <= 1e-6
    r = ids.check_interior_identity(surface("hyperbolic", 1.0, "geodesic_disk", offset=0.3), spec(E1))
    assert r.details["residual_Va"] <= 1e-8 and r.passed
    r = ids.check_interior_identity(surface("spherical", 2.5, "geodesic_disk", offset=0.0), spec(E3))
    assert r.passed


def test_phi_auxiliary():
    assert ids.check_phi_auxiliary(surface("euclidean", 1.0, "flat_disk", c=0.3)).residual_max <= 1e-9
    r = ids.check_phi_auxiliary(surface(*CATENOID, critical=True))
    assert r.details["boundary_max"] <= 1e-8 and r.passed
    assert ids.check_phi_auxiliary(surface("hyperbolic", 1.0, "geodesic_disk", offset=0.0)).residual_max <= 1e-7


@pytest.mark.parametrize("space,R", [("euclidean", 1.0), ("hyperbolic", 2.0), ("spherical", 2.5)])
def test_killing_check(space, R):
    r = ids.check_killing(ball(space, R))
    assert r.passed
    control = r.details["position_field_control"]
    # the conformal position field is not Killing: far above the Killing tolerance
    assert abs(control) > 1e3 * r.tolerance


def test_wrong_angle_breaks_admissibility():
    # negative control: the test function built with a perturbed angle is not admissible
    s = surface("euclidean", 1.0, "flat_disk", c=0.5)
    th = boundary_frame(s).theta_mean
    P, w = ids._boundary_samples(s, 256)
    good = np.sum(ids.test_function_values(s, spec(E3), P, th) * w)
    bad = np.sum(ids.test_function_values(s, spec(E3), P, th + 0.2) * w)
    assert abs(good) <= 1e-12
    assert abs(bad) > 0.1


# Q(x3, x3) on the critical catenoid X = c (cosh t cos s, cosh t sin s, t), |t| <= t0, q = 1:
# 4 pi c^2 t0 - 2 pi int 2 c^2 t^2 / cosh^2 t dt - 4 pi c^3 t0^2 cosh t0
Q_X3_CATENOID = -1.5222763412039468


def test_closed_form_catenoid_oracle():
    from scipy.integrate import quad
    from scipy.optimize import brentq
    t0 = brentq(lambda t: t * np.tanh(t) - 1, 0.5, 2.0, xtol=1e-15)
    c = 1 / np.sqrt(np.cosh(t0) ** 2 + t0 ** 2)
    pot = 2 * np.pi * quad(lambda t: 2 * c * c * t * t / np.cosh(t) ** 2, -t0, t0, epsabs=1e-15)[0]
    q = 4 * np.pi * c * c * t0 - pot - 4 * np.pi * c ** 3 * t0 ** 2 * np.cosh(t0)
    assert q == pytest.approx(Q_X3_CATENOID, abs=1e-13)


def test_stability_chain_matches_closed_form():
    # phi_3 = x3 on the critical catenoid (theta = pi/2, s(R) = 1)
    vals = [ids.stability_chain(surface(*CATENOID, level, critical=True), assembly(*CATENOID, level, critical=True))
            for level in (1, 2)]
    errs = [abs(v[2] - Q_X3_CATENOID) for v in vals]
    assert errs[1] <= 1e-3 and errs[1] < errs[0]
    flat = ids.stability_chain(surface("euclidean", 1.0, "flat_disk", 2, c=0.0),
                               assembly("euclidean", 1.0, "flat_disk", 2, c=0.0))
    assert np.max(np.abs(flat)) <= 5e-3


def test_mesh_interior_residual_converges():
    res = [ids.mesh_interior_residual(surface(*CATENOID, level, critical=True), spec(E1),
                                      assembly(*CATENOID, level, critical=True)) for level in (0, 1, 2)]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all(orders >= 1.0)


def test_preconditions():
    s = surface("euclidean", 1.0, "flat_disk", 1, c=0.0)
    with pytest.raises(PreconditionError):
        ids.check_admissibility(Immersion(s.ball, None, s.mesh), spec(E1))
    # a hyperbolic cap patch read in flat space is a round cap, not minimal
    h = surface("hyperbolic", 1.0, "geodesic_disk", offset=0.3)
    flat_cap = Immersion(ball("euclidean", h.ball.radius_model), dataclasses.replace(h.patch, kappa=0))
    with pytest.raises(PreconditionError):
        ids.check_boundary_identity(flat_cap, spec(E1))
