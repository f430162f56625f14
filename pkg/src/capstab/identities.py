"""Numerical checks of the test-function identities on analytic patches and meshes.

The unified test function for direction ``a`` is

    phi_a = g(Y_a, x) / (sin theta * s(R)) + cot theta * g(Y_a, nu),

with g(Y_a, x) = V_a and s(R) = R, sinh R, sin R. In flat space with R = 1 it
reduces to <x, a>/sin theta + cot theta <nu, a>. On a minimal surface

    Delta V_a          = -2 kappa V_a
    Delta g(Y_a, nu)   = -(|h|^2 + 2 kappa) g(Y_a, nu)
    J phi_a            = |h|^2 V_a / (sin theta * s(R)),   J = Delta + |h|^2 + Ric(nu, nu)

and on the boundary phi_a = g(Y_a, mu) and d_mu phi_a = q phi_a.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import spaceform as sf
from .errors import PreconditionError
from .surface import boundary_frame

AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))
TOL_ANALYTIC = 1e-6


@dataclass(frozen=True)
class TestFunctionSpec:
    """Direction of the test function; the ambient comes from the surface."""

    direction: tuple

    __test__ = False  # not a pytest class

    @classmethod
    def along(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(tuple(float(x) for x in a / np.linalg.norm(a)))


@dataclass
class IdentityReport:
    id: str
    surface: str
    residual_max: float
    residual_l2: float
    tolerance: float
    resolution: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.residual_max <= self.tolerance)

    def to_dict(self):
        out = {
            "id": self.id,
            "surface": self.surface,
            "residual_max": float(self.residual_max),
            "residual_l2": float(self.residual_l2),
            "tolerance": float(self.tolerance),
            "resolution": self.resolution,
            "pass": self.passed,
        }
        for k in sorted(self.details):
            out[k] = self.details[k]
        return out


def _report(id_, surface, res, tol, resolution, **details):
    res = np.atleast_1d(np.abs(np.asarray(res, dtype=float)))
    return IdentityReport(id_, surface.label, float(np.max(res)), float(np.sqrt(np.mean(res ** 2))),
                          tol, resolution, details)


def _require_patch(surface):
    if surface.patch is None:
        raise PreconditionError("analytic identity checks need an analytic patch")


def _stationary_frame(surface, n_samples=256):
    fr = boundary_frame(surface, n_samples)
    if not fr.is_stationary:
        raise PreconditionError(
            f"{surface.label} is not stationary (max|H| = {fr.max_abs_H:.2e}, "
            f"theta deviation = {fr.theta_deviation:.2e})")
    return fr


def _aux(surface, spec, theta):
    a = np.asarray(spec.direction, dtype=float)
    return np.r_[a, np.cos(theta), np.sin(theta), surface.ball.sr]


def _boundary_samples(surface, n):
    """Boundary params, ambient arc-length weights of the periodic trapezoid rule."""
    patch, k = surface.patch, surface.ball.kappa
    out = []
    for Pb, s, curve in patch.boundary_params(n):
        d1, _ = (np.asarray(v) for v in patch.kernels["curve_accel"](curve)(patch.prm_array(), s))
        X = patch.position(Pb)
        speed = np.sqrt(sf.metric_pair(k, X, d1, d1))
        out.append((Pb, speed * (2 * np.pi / n)))
    P = np.concatenate([o[0] for o in out])
    w = np.concatenate([o[1] for o in out])
    return P, w


def test_function_values(surface, spec, P, theta):
    """phi_a at parameter points ``P``."""
    v, _ = surface.patch.field_and_gradient("phi", _aux(surface, spec, theta), P)
    return v


def check_admissibility(surface, spec, n_samples=512, tol=TOL_ANALYTIC):
    """|int_dM phi_a ds| and max |phi_a - g(Y_a, mu)| on the boundary."""
    _require_patch(surface)
    fr = _stationary_frame(surface)
    th = fr.theta_mean
    P, w = _boundary_samples(surface, n_samples)
    phi = test_function_values(surface, spec, P, th)
    integral = float(np.sum(phi * w))
    # boundary identity phi_a = g(Y_a, mu)
    patch, k = surface.patch, surface.ball.kappa
    loc = patch.geometry(P)
    mi = patch.conormal(P)
    mu = np.einsum("nki,ni->nk", loc["J"], mi)
    Y = sf.killing_y(k, loc["X"], np.asarray(spec.direction))
    ymu = sf.metric_pair(k, loc["X"], Y, mu)
    res = np.r_[integral, phi - ymu]
    return _report("admissibility", surface, res, tol, f"{n_samples} boundary samples",
                   direction=list(spec.direction), boundary_integral=integral,
                   boundary_identity_max=float(np.max(np.abs(phi - ymu))))


def check_boundary_identity(surface, spec, n_samples=256, tol=TOL_ANALYTIC):
    """max |d_mu phi_a - q phi_a| with q = p(R)/sin theta + cot theta h(mu, mu)."""
    _require_patch(surface)
    fr = _stationary_frame(surface, n_samples)
    th = fr.theta_mean
    patch = surface.patch
    rows = []
    for Pb, _, _ in patch.boundary_params(n_samples):
        phi, grad = patch.field_and_gradient("phi", _aux(surface, spec, th), Pb)
        mi = patch.conormal(Pb)
        rows.append((phi, np.einsum("ni,ni->n", mi, grad)))
    phi = np.concatenate([r[0] for r in rows])
    dmu = np.concatenate([r[1] for r in rows])
    res = dmu - fr.q * phi
    return _report("boundary_identity", surface, res, tol, f"{n_samples} samples per boundary component",
                   direction=list(spec.direction), q_mean=float(np.mean(fr.q)))


def check_interior_identity(surface, spec, tol=TOL_ANALYTIC, n=12):
    """Residuals of the three interior identities (V_a, g(Y_a, nu), J phi_a)."""
    _require_patch(surface)
    fr = _stationary_frame(surface)
    th = fr.theta_mean
    patch, ball = surface.patch, surface.ball
    k = ball.kappa
    P = patch.interior_samples(n)
    aux = _aux(surface, spec, th)
    h2 = patch.geometry(P)["h2"]
    va, lva = patch.field_and_laplacian("Va", aux, P)
    yn, lyn = patch.field_and_laplacian("Ynu", aux, P)
    ph, lph = patch.field_and_laplacian("phi", aux, P)
    r_va = lva + 2 * k * va
    r_yn = lyn + (h2 + 2 * k) * yn
    r_ph = lph + (h2 + 2 * k) * ph - h2 * va / (np.sin(th) * ball.sr)
    res = np.r_[r_va, r_yn, r_ph]
    return _report("interior_identity", surface, res, tol, f"{len(P)} interior samples",
                   direction=list(spec.direction), residual_Va=float(np.max(np.abs(r_va))),
                   residual_Ynu=float(np.max(np.abs(r_yn))), residual_phi=float(np.max(np.abs(r_ph))))


def check_phi_auxiliary(surface, tol=TOL_ANALYTIC, n_samples=256, n=12):
    """Phi vanishes on dM and satisfies Delta g(x, nu) = -|h|^2 g(x, nu).

    Flat: Phi = <x, nu> + R cos theta. Curved: Phi = -(g(x, nu) + s(R) cos theta).
    """
    _require_patch(surface)
    fr = _stationary_frame(surface, n_samples)
    th = fr.theta_mean
    patch = surface.patch
    aux = np.r_[0.0, 0.0, 0.0, np.cos(th), np.sin(th), surface.ball.sr]
    Pb = np.concatenate([b[0] for b in patch.boundary_params(n_samples)])
    phib, _ = patch.field_and_gradient("Phi", aux, Pb)
    P = patch.interior_samples(n)
    Phi, lPhi = patch.field_and_laplacian("Phi", aux, P)
    xnu, _ = patch.field_and_gradient("xnu", aux, P)
    h2 = patch.geometry(P)["h2"]
    target = -h2 * xnu if surface.ball.kappa == 0 else h2 * xnu
    r_int = lPhi - target
    res = np.r_[phib, r_int]
    return _report("phi_auxiliary", surface, res, tol, f"{len(Pb)} boundary / {len(P)} interior samples",
                   boundary_max=float(np.max(np.abs(phib))), interior_max=float(np.max(np.abs(r_int))))


def check_killing(ball, tol=1e-8, n_points=27, seed=0):
    """Killing residual of Y_a on a grid of points and probe pairs (three directions)."""
    rng = np.random.default_rng(seed)
    Rm = ball.radius_model
    g = np.linspace(-0.55, 0.55, 3) * Rm
    pts = np.array(np.meshgrid(g, g, g, indexing="ij")).reshape(3, -1).T[:n_points]
    probes = [(np.eye(3)[i], np.eye(3)[j]) for i in range(3) for j in range(i, 3)]
    probes.append((rng.normal(size=3), rng.normal(size=3)))
    res = []
    for a in AXES:
        fld = sf.AmbientField("killing_Y", a)
        for x in pts:
            for z, w in probes:
                res.append(sf.killing_residual(ball, fld, x, (z, w)))
    # positive control: the position field is conformal but not Killing in curved spaces
    ctrl = sf.symmetrized_derivative(ball, sf.AmbientField("position_x"), pts[0], (probes[0][0], probes[0][0]))
    out = IdentityReport("killing", f"{ball.space.name}(R={ball.radius:g})", float(np.max(np.abs(res))),
                         float(np.sqrt(np.mean(np.square(res)))), tol, f"{len(pts)} points x {len(probes)} probes",
                         {"position_field_control": float(ctrl)})
    return out


def stability_chain(surface, assembly, theta=None):
    """Q(phi_a, phi_a) for the coordinate directions, with phi_a sampled at the mesh vertices."""
    from .discretize import evaluate_Q

    _require_patch(surface)
    if theta is None:
        theta = boundary_frame(surface).theta_mean
    vals = []
    for a in AXES:
        phi = test_function_values(surface, TestFunctionSpec(a), surface.mesh.params, theta)
        vals.append(evaluate_Q(assembly, phi, phi))
    return vals


# ---------------------------------------------------------------------------
# mesh residuals
# ---------------------------------------------------------------------------

def mesh_interior_residual(surface, spec, assembly=None, theta=None):
    """Weak residual of J phi_a = |h|^2 V_a/(sin theta s(R)) in the discrete H^-1 norm.

    With hat functions psi_i at interior vertices,
    r_i = int grad phi_h . grad psi_i - (|h|^2 + 2 kappa) phi_h psi_i + f psi_i,
    measured as sqrt(r^T K_0^{-1} r) with K_0 the interior stiffness block.
    """
    from scipy.sparse.linalg import spsolve

    from .discretize import assemble

    _require_patch(surface)
    if surface.mesh is None:
        raise PreconditionError("mesh residual needs a meshed surface")
    A = assembly if assembly is not None else assemble(surface)
    if theta is None:
        theta = boundary_frame(surface).theta_mean
    P = surface.mesh.params
    aux = _aux(surface, spec, theta)
    phi, _ = surface.patch.field_and_gradient("phi", aux, P)
    va, _ = surface.patch.field_and_gradient("Va", aux, P)
    h2 = surface.patch.geometry(P)["h2"]
    f = h2 * va / (np.sin(theta) * surface.ball.sr)
    r = (A.K - A.P) @ phi + A.M @ f
    inner = surface.mesh.interior_vertices
    K0 = A.K[inner][:, inner].tocsc()
    ri = r[inner]
    return float(np.sqrt(max(ri @ spsolve(K0, ri), 0.0)))
