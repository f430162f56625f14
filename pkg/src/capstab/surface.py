"""Immersed surfaces in a ball: analytic families, meshes and pointwise geometry.

Analytic patches are differentiated exactly with jax. Every patch map has the
signature ``map(prm, p) -> X`` with a dynamic parameter vector ``prm`` so that
compiled kernels are shared across family parameters.
"""

import functools
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from ._jax import jax, jnp
from .errors import ArgumentError, ConstructionError, ContactAngleError, MeshQualityError, TopologyError
from .mesh import TriMesh, annulus_param_mesh, disk_param_mesh
from . import spaceform as sf

THETA_MIN = 0.05
TOL_PROP_ANALYTIC = 1e-8
TOL_MIN_ANALYTIC = 1e-8
TOL_ANGLE_ANALYTIC = 1e-6
TOL_PROP_MESH = 1e-6  # relative to the model radius
TOL_MIN_MESH = 3.0  # times the mesh size; the quadric fit gives H to first order
TOL_ANGLE_MESH = 20.0  # times the mesh size
FAMILIES = ("flat_disk", "catenoid", "geodesic_disk")


# ---------------------------------------------------------------------------
# patch maps
# ---------------------------------------------------------------------------

def _plane_map(prm, p):
    # prm = (s, z0)
    return jnp.array([prm[0] * p[0], prm[0] * p[1], prm[1]])


def _cap_map(prm, p):
    # prm = (s, C, rho, sigma): graph of a sphere of centre C e3 over the disk of radius s
    s, c, rho, sig = prm[0], prm[1], prm[2], prm[3]
    r2 = s * s * (p[0] ** 2 + p[1] ** 2)
    return jnp.array([s * p[0], s * p[1], c + sig * jnp.sqrt(rho * rho - r2)])


def _catenoid_map(prm, p):
    # prm = (c, scale); p = (t, phi)
    c, a = prm[0], prm[1]
    t, ph = p[0], p[1]
    return a * jnp.array([c * jnp.cosh(t) * jnp.cos(ph), c * jnp.cosh(t) * jnp.sin(ph), c * t])


MAPS = {"plane": _plane_map, "cap": _cap_map, "catenoid": _catenoid_map}


def _domain_rho(domain, p, prm_dom):
    """Defining function of the parameter domain; boundary at 0, positive outside."""
    if domain == "disk":
        return p[0] ** 2 + p[1] ** 2 - 1.0
    return p[0] ** 2 - prm_dom ** 2


# ---------------------------------------------------------------------------
# jax kernels, compiled once per (map, curvature sign, domain)
# ---------------------------------------------------------------------------

def _local(map_fn, kappa, prm, p):
    X = map_fn(prm, p)
    J = jax.jacfwd(map_fn, argnums=1)(prm, p)  # 3 x 2
    Hs = jax.jacfwd(jax.jacfwd(map_fn, argnums=1), argnums=1)(prm, p)  # 3 x 2 x 2
    lam = sf.conformal_lambda(kappa, X, jnp)
    gu = sf.grad_log_lambda(kappa, X, jnp)
    n = jnp.cross(J[:, 0], J[:, 1])
    n = n / jnp.linalg.norm(n)
    G = J.T @ J
    g = lam * lam * G
    # h_ij = -<nu, nabla_{X_i} X_j> in the ambient metric, nu = n / lam
    h = -lam * (jnp.einsum("k,kij->ij", n, Hs) - G * jnp.dot(n, gu))
    gi = jnp.linalg.inv(g)
    H = jnp.trace(gi @ h)
    h2 = jnp.trace(gi @ h @ gi @ h)
    return dict(X=X, J=J, n=n, lam=lam, g=g, gi=gi, h=h, H=H, h2=h2)


def _scalar_field(name, map_fn, kappa, prm, aux, p):
    """Scalar fields on the patch.

    ``aux = (a0, a1, a2, cos theta, sin theta, s(R))``.
    """
    X = map_fn(prm, p)
    J = jax.jacfwd(map_fn, argnums=1)(prm, p)
    n = jnp.cross(J[:, 0], J[:, 1])
    n = n / jnp.linalg.norm(n)
    lam = sf.conformal_lambda(kappa, X, jnp)
    a = aux[:3]
    ct, st, sr = aux[3], aux[4], aux[5]
    if name == "Va":
        return sf.potential_va(kappa, X, a, jnp)
    if name == "Ynu":
        return lam * jnp.dot(sf.killing_y(kappa, X, a, jnp), n)
    if name == "xnu":
        return lam * jnp.dot(X, n)
    if name == "phi":
        va = sf.potential_va(kappa, X, a, jnp)
        ynu = lam * jnp.dot(sf.killing_y(kappa, X, a, jnp), n)
        return va / (st * sr) + (ct / st) * ynu
    if name == "Phi":
        xnu = lam * jnp.dot(X, n)
        return xnu + ct * sr if kappa == 0 else -(xnu + ct * sr)
    if name == "coord":
        return jnp.dot(X, a)
    raise ArgumentError(f"unknown scalar field {name!r}", module="surface")


def _laplacian(fn, map_fn, kappa, prm, p):
    """Laplace-Beltrami of the scalar ``fn(p)`` in divergence form."""

    def metric(q):
        J = jax.jacfwd(map_fn, argnums=1)(prm, q)
        lam = sf.conformal_lambda(kappa, map_fn(prm, q), jnp)
        return lam * lam * (J.T @ J)

    def flux(q):
        g = metric(q)
        return jnp.sqrt(jnp.linalg.det(g)) * jnp.linalg.solve(g, jax.grad(fn)(q))

    div = jnp.trace(jax.jacfwd(flux)(p))
    return div / jnp.sqrt(jnp.linalg.det(metric(p)))


@functools.lru_cache(maxsize=None)
def _kernels(mapname, kappa, domain):
    map_fn = MAPS[mapname]

    def geom(prm, p):
        return _local(map_fn, kappa, prm, p)

    vm = jax.vmap

    @functools.lru_cache(maxsize=None)
    def field_and_lap(name):
        def fn(prm, aux, p):
            f = functools.partial(_scalar_field, name, map_fn, kappa, prm, aux)
            return f(p), _laplacian(f, map_fn, kappa, prm, p)
        return jax.jit(vm(fn, in_axes=(None, None, 0)))

    @functools.lru_cache(maxsize=None)
    def field_and_grad(name):
        def fn(prm, aux, p):
            f = functools.partial(_scalar_field, name, map_fn, kappa, prm, aux)
            return f(p), jax.grad(f)(p)
        return jax.jit(vm(fn, in_axes=(None, None, 0)))

    def conormal(prm, pdom, p):
        loc = _local(map_fn, kappa, prm, p)
        drho = jax.grad(lambda q: _domain_rho(domain, q, pdom))(p)
        m = loc["gi"] @ drho
        m = m / jnp.sqrt(m @ loc["g"] @ m)
        return m

    @functools.lru_cache(maxsize=None)
    def curve_accel(curve):
        """gamma' and the ambient covariant gamma'' for the boundary curve p = curve(s)."""
        def fn(prm, s):
            X = lambda u: map_fn(prm, curve(u))  # noqa: E731
            d1 = jax.jacfwd(X)(s)
            d2 = jax.jacfwd(jax.jacfwd(X))(s)
            gu = sf.grad_log_lambda(kappa, X(s), jnp)
            return d1, d2 + 2.0 * jnp.dot(d1, gu) * d1 - jnp.dot(d1, d1) * gu
        return jax.jit(vm(fn, in_axes=(None, 0)))

    return dict(
        geom=jax.jit(vm(geom, in_axes=(None, 0))),
        field_and_lap=field_and_lap,
        field_and_grad=field_and_grad,
        conormal=jax.jit(vm(conormal, in_axes=(None, None, 0))),
        curve_accel=curve_accel,
    )


def _disk_curve(s):
    return jnp.array([jnp.cos(s), jnp.sin(s)])


@functools.lru_cache(maxsize=None)
def _annulus_curve(t_half, sign):
    return lambda s: jnp.array([sign * t_half, s])


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceFamily:
    """Family identifier plus resolved parameters.

    ``name`` is one of ``flat_disk`` (param ``c``), ``catenoid`` (``waist`` or
    ``critical=True``) and ``geodesic_disk`` (``offset``; the ambient ball
    fixes space and radius).
    """

    name: str
    params: tuple = ()

    @classmethod
    def make(cls, name, **params):
        if name not in FAMILIES:
            raise ConstructionError(f"unknown family {name!r}; expected one of {FAMILIES}")
        return cls(name, tuple(sorted(params.items())))

    @property
    def kwargs(self):
        return dict(self.params)

    def label(self):
        kw = ",".join(f"{k}={v}" for k, v in self.params)
        return f"{self.name}({kw})"


def critical_catenoid_t0(tol=1e-12):
    """Root of t tanh t = 1 by bisection."""
    lo, hi = 0.5, 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid * np.tanh(mid) - 1.0 > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def catenoid_half_height(waist):
    """t_b with waist^2 (cosh^2 t_b + t_b^2) = 1."""
    if not 0 < waist < 1:
        raise ConstructionError(f"catenoid waist must lie in (0, 1), got {waist}")
    return brentq(lambda t: waist ** 2 * (np.cosh(t) ** 2 + t * t) - 1.0, 0.0, 10.0, xtol=1e-15)


@dataclass(frozen=True)
class AnalyticPatch:
    """Closed-form immersion of a parameter domain.

    ``domain`` is ``"disk"`` (unit disk, Cartesian coordinates) or
    ``"annulus"`` (``[-t_half, t_half] x [0, 2 pi)``).
    """

    mapname: str
    prm: tuple
    domain: str
    kappa: int
    t_half: float = 0.0

    @property
    def kernels(self):
        return _kernels(self.mapname, self.kappa, self.domain)

    def prm_array(self):
        return jnp.asarray(self.prm, dtype=float)

    def position(self, P):
        P = jnp.atleast_2d(jnp.asarray(P, dtype=float))
        return np.asarray(jax.vmap(lambda p: MAPS[self.mapname](self.prm_array(), p))(P))

    def geometry(self, P):
        P = jnp.atleast_2d(jnp.asarray(P, dtype=float))
        return {k: np.asarray(v) for k, v in self.kernels["geom"](self.prm_array(), P).items()}

    def boundary_params(self, n):
        """Parameter samples on each boundary component (list of arrays) and the curve parameter."""
        s = 2 * np.pi * np.arange(n) / n
        if self.domain == "disk":
            return [(np.c_[np.cos(s), np.sin(s)], s, _disk_curve)]
        out = []
        for sign in (1.0, -1.0):
            out.append((np.c_[np.full(n, sign * self.t_half), s], s, _annulus_curve(self.t_half, sign)))
        return out

    def conormal(self, P):
        return np.asarray(self.kernels["conormal"](self.prm_array(), self.t_half, jnp.asarray(P)))

    def field_and_laplacian(self, name, aux, P):
        v, lap = self.kernels["field_and_lap"](name)(self.prm_array(), jnp.asarray(aux, dtype=float),
                                                jnp.asarray(P, dtype=float))
        return np.asarray(v), np.asarray(lap)

    def field_and_gradient(self, name, aux, P):
        v, gr = self.kernels["field_and_grad"](name)(self.prm_array(), jnp.asarray(aux, dtype=float),
                                                jnp.asarray(P, dtype=float))
        return np.asarray(v), np.asarray(gr)

    def interior_samples(self, n=12):
        """Deterministic interior sample grid in the parameter domain."""
        if self.domain == "disk":
            r = (np.arange(n) + 0.5) / n * 0.98
            a = 2 * np.pi * (np.arange(2 * n) + 0.25) / (2 * n)
            R, A = np.meshgrid(r, a, indexing="ij")
            return np.c_[(R * np.cos(A)).ravel(), (R * np.sin(A)).ravel()]
        t = np.linspace(-self.t_half, self.t_half, n + 2)[1:-1]
        a = 2 * np.pi * (np.arange(2 * n) + 0.25) / (2 * n)
        T, A = np.meshgrid(t, a, indexing="ij")
        return np.c_[T.ravel(), A.ravel()]


@dataclass(frozen=True)
class Immersion:
    """A surface in an ambient ball, analytic and/or meshed."""

    ball: sf.AmbientBall
    patch: Optional[AnalyticPatch] = None
    mesh: Optional[TriMesh] = field(default=None, compare=False)
    family: Optional[SurfaceFamily] = None
    level: Optional[int] = None

    @property
    def label(self):
        base = self.family.label() if self.family else "mesh"
        return f"{self.ball.space.name}(R={self.ball.radius:g})/{base}"

    def meshed(self, level):
        """Sample the analytic patch onto a parameter-grid mesh of the given level."""
        if self.patch is None:
            raise ArgumentError("only analytic immersions can be re-meshed", module="surface")
        if self.patch.domain == "disk":
            pm = disk_param_mesh(level)
        else:
            pm = annulus_param_mesh(level, self.patch.t_half)
        X = np.array(self.patch.position(pm.params))
        # boundary vertices exactly on dB
        b = pm.boundary
        X[b] *= (self.ball.radius_model / np.linalg.norm(X[b], axis=1))[:, None]
        mesh = TriMesh(X, pm.faces, pm.params)
        return replace(self, mesh=mesh, level=level)


def _frozen_ball(ball):
    return ball if isinstance(ball, sf.AmbientBall) else sf.AmbientBall.from_config(ball)


def build_family(family, ball=None, level=None):
    """Construct an analytic immersion for a shipped family.

    Parameters
    ----------
    family : SurfaceFamily
    ball : AmbientBall, optional
        Defaults to the unit euclidean ball.
    level : int, optional
        If given, also attach a mesh of this refinement level.
    """
    ball = sf.AmbientBall(sf.AmbientSpace(0), 1.0) if ball is None else _frozen_ball(ball)
    kw = family.kwargs
    k = ball.kappa
    Rm = ball.radius_model
    if family.name == "flat_disk":
        if k != 0:
            raise ConstructionError("flat_disk lives in a euclidean ball; use geodesic_disk")
        c = float(kw.get("c", 0.0))
        if not abs(c) < Rm:
            raise ConstructionError(f"flat_disk offset must satisfy |c| < R = {Rm}, got {c}")
        patch = AnalyticPatch("plane", (np.sqrt(Rm * Rm - c * c), c), "disk", k)
    elif family.name == "geodesic_disk":
        d = float(kw.get("offset", 0.0))
        if not abs(d) < ball.radius:
            raise ConstructionError(f"geodesic_disk offset must satisfy |d| < R = {ball.radius}, got {d}")
        patch = _geodesic_disk_patch(ball, d)
    else:
        if k != 0:
            raise ConstructionError("catenoid family requires a euclidean ball")
        if kw.get("critical", False):
            t0 = critical_catenoid_t0()
            c = 1.0 / np.sqrt(np.cosh(t0) ** 2 + t0 * t0)
        else:
            if "waist" not in kw:
                raise ConstructionError("catenoid needs waist=<c> or critical=True")
            c = float(kw["waist"])
            t0 = catenoid_half_height(c)
        patch = AnalyticPatch("catenoid", (c, Rm), "annulus", k, t_half=float(t0))
    imm = Immersion(ball, patch, family=family)
    _check_proper(imm)
    return imm.meshed(level) if level is not None else imm


def _geodesic_disk_patch(ball, d):
    k, Rm = ball.kappa, ball.radius_model
    if k == 0 or d == 0.0:
        return AnalyticPatch("plane", (np.sqrt(Rm * Rm - d * d), d), "disk", k)
    z0 = np.tanh(d / 2) if k == -1 else np.tan(d / 2)
    z1 = -k / z0
    C = 0.5 * (z0 + z1)
    rho = 0.5 * abs(z0 - z1)
    sig = np.sign(z0 - C)
    zb = (Rm * Rm - rho * rho + C * C) / (2 * C)
    if sig * (zb - C) < 0 or Rm * Rm - zb * zb <= 0:
        raise ConstructionError(f"offset {d} does not give a graph-like cap inside the ball")
    s = np.sqrt(Rm * Rm - zb * zb)
    return AnalyticPatch("cap", (s, C, rho, sig), "disk", k)


def _check_proper(imm, n=64):
    P = imm.patch.interior_samples(8)
    X = imm.patch.position(P)
    if np.any(np.linalg.norm(X, axis=1) >= imm.ball.radius_model * (1 + TOL_PROP_ANALYTIC)):
        raise ConstructionError("interior samples leave the ball")
    for Pb, _, _ in imm.patch.boundary_params(n):
        r = np.linalg.norm(imm.patch.position(Pb), axis=1)
        err = np.max(np.abs(r - imm.ball.radius_model))
        if err > TOL_PROP_ANALYTIC * max(1.0, imm.ball.radius_model):
            raise ConstructionError(f"boundary off dB by {err:.3e}")


# ---------------------------------------------------------------------------
# shape data and boundary frame
# ---------------------------------------------------------------------------

@dataclass
class ShapeData:
    normal: np.ndarray  # model components, ambient-unit
    h: Optional[np.ndarray]  # (n, 2, 2) in parameter or local frame
    h2: np.ndarray
    H: np.ndarray
    metric: Optional[np.ndarray] = None

    @property
    def max_abs_H(self):
        return float(np.max(np.abs(self.H))) if self.H.size else 0.0


def shape_data(surface, where=None):
    """Normal, second fundamental form, |h|^2 and H at interior samples.

    Analytic patches use exact derivatives; otherwise the mesh vertices are
    fitted by local quadrics (``where`` then indexes vertices).
    """
    if surface.patch is not None:
        P = surface.patch.interior_samples() if where is None else np.atleast_2d(where)
        loc = surface.patch.geometry(P)
        nu = loc["n"] / loc["lam"][:, None]
        return ShapeData(nu, loc["h"], loc["h2"], loc["H"], loc["g"])
    if surface.mesh is None:
        raise ArgumentError("immersion has neither a patch nor a mesh", module="surface")
    fit = fitted_shape(surface.mesh, surface.ball)
    idx = np.arange(surface.mesh.n_vertices) if where is None else np.asarray(where)
    return ShapeData(fit["nu"][idx], fit["h"][idx], fit["h2"][idx], fit["H"][idx])


def fitted_shape(mesh, ball, rings=2):
    """Quadric-fit second fundamental form per vertex, corrected to the conformal metric.

    In a euclidean orthonormal tangent frame the ambient shape form is
    ``lam * (h_euc + <n, grad u> I)``, with induced metric ``lam^2 I``.
    """
    mesh.check_quality()
    V = mesh.vertices
    nrm = mesh.vertex_normals()
    nbrs = mesh.vertex_rings(rings)
    heuc = np.zeros((len(V), 2, 2))
    for i, nb in enumerate(nbrs):
        n = nrm[i]
        for _ in range(2):
            e1 = np.cross(n, [1.0, 0, 0] if abs(n[0]) < 0.9 else [0, 1.0, 0])
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(n, e1)
            d = V[nb] - V[i]
            x, y, z = d @ e1, d @ e2, d @ n
            A = np.c_[x * x, x * y, y * y, x, y]
            coef = np.linalg.lstsq(A, z, rcond=None)[0]
            gx, gy = coef[3], coef[4]
            tilt = n - gx * e1 - gy * e2
            n_new = tilt / np.linalg.norm(tilt)
            if np.linalg.norm(n_new - n) < 1e-12:
                break
            n = n_new
        nrm[i] = n
        a, b, c = coef[:3]
        w = np.sqrt(1 + gx * gx + gy * gy)
        heuc[i] = -np.array([[2 * a, b], [b, 2 * c]]) / w
    lam = sf.conformal_lambda(ball.kappa, V)
    gu = sf.grad_log_lambda(ball.kappa, V)
    shift = np.einsum("ij,ij->i", nrm, gu)
    hc = heuc + shift[:, None, None] * np.eye(2)
    h2 = np.einsum("nij,nij->n", hc, hc) / lam ** 2
    H = np.trace(hc, axis1=1, axis2=2) / lam
    return dict(n=nrm, nu=nrm / lam[:, None], h=lam[:, None, None] * hc, h2=h2, H=H)


@dataclass
class BoundaryFrame:
    """Per-sample boundary frame and its constancy report."""

    points: np.ndarray
    mu: np.ndarray
    nu: np.ndarray
    Nbar: np.ndarray
    nubar: np.ndarray
    theta: np.ndarray
    kappa_g: np.ndarray
    kappa_g_bar: np.ndarray
    h_mumu: np.ndarray
    q: np.ndarray
    max_abs_H: float
    tol_min: float
    tol_angle: float
    frame_residual: float
    curvature_residual: float

    @property
    def theta_mean(self):
        return float(np.mean(self.theta))

    @property
    def theta_deviation(self):
        return float(np.max(np.abs(self.theta - self.theta_mean)))

    @property
    def is_stationary(self):
        return self.max_abs_H <= self.tol_min and self.theta_deviation <= self.tol_angle

    def summary(self):
        return {
            "theta_mean": self.theta_mean,
            "theta_max_deviation": self.theta_deviation,
            "q_mean": float(np.mean(self.q)),
            "q_min": float(np.min(self.q)),
            "q_max": float(np.max(self.q)),
            "max_abs_H": self.max_abs_H,
            "frame_residual": self.frame_residual,
            "is_stationary": bool(self.is_stationary),
        }


def _check_theta(theta):
    bad = (theta < THETA_MIN) | (theta > np.pi - THETA_MIN)
    if np.any(bad):
        raise ContactAngleError(f"contact angle {theta[bad][0]:.4f} rad too close to 0 or pi")


def _frame_from_vectors(ball, X, nu, mu):
    k = ball.kappa
    Nb = sf.radial_unit_normal(k, X)
    cos_t = -sf.metric_pair(k, X, nu, Nb)
    sin_t = sf.metric_pair(k, X, mu, Nb)
    theta = np.arctan2(sin_t, cos_t)
    nubar = (nu + cos_t[:, None] * Nb) / sin_t[:, None]
    lam = sf.conformal_lambda(k, X)
    res_mu = np.linalg.norm((mu - (sin_t[:, None] * Nb + cos_t[:, None] * nubar)) * lam[:, None], axis=1)
    res_nu = np.linalg.norm((nu - (-cos_t[:, None] * Nb + sin_t[:, None] * nubar)) * lam[:, None], axis=1)
    return Nb, nubar, theta, cos_t, sin_t, max(res_mu.max(), res_nu.max())


def boundary_frame(surface, n_samples=256):
    """Boundary frame (mu, Nbar, nubar, theta, kappa_g, kappa_g_bar, h(mu,mu), q)."""
    if surface.patch is None:
        return _mesh_boundary_frame(surface)
    patch, ball = surface.patch, surface.ball
    k = ball.kappa
    rows = []
    for Pb, s, curve in patch.boundary_params(n_samples):
        loc = patch.geometry(Pb)
        X = loc["X"]
        nu = loc["n"] / loc["lam"][:, None]
        mi = patch.conormal(Pb)
        mu = np.einsum("nki,ni->nk", loc["J"], mi)
        hmm = np.einsum("ni,nij,nj->n", mi, loc["h"], mi)
        d1, acc = (np.asarray(a) for a in patch.kernels["curve_accel"](curve)(patch.prm_array(), jnp.asarray(s)))
        rows.append((X, nu, mu, hmm, d1, acc, loc["H"]))
    X, nu, mu, hmm, d1, acc, Hb = (np.concatenate(c) for c in zip(*rows))
    Nb, nubar, theta, cos_t, sin_t, fres = _frame_from_vectors(ball, X, nu, mu)
    _check_theta(theta)
    speed2 = sf.metric_pair(k, X, d1, d1)
    kg = -sf.metric_pair(k, X, mu, acc) / speed2
    kgb = -sf.metric_pair(k, X, nubar, acc) / speed2
    p = ball.boundary_curvature
    cres = float(np.max(np.abs(kg - (cos_t * kgb + sin_t * p))))
    q = p / sin_t + (cos_t / sin_t) * hmm
    Hint = shape_data(surface).H
    maxH = float(max(np.max(np.abs(Hint)), np.max(np.abs(Hb))))
    return BoundaryFrame(X, mu, nu, Nb, nubar, theta, kg, kgb, hmm, q, maxH,
                         TOL_MIN_ANALYTIC, TOL_ANGLE_ANALYTIC, float(fres), cres)


def mesh_size(mesh):
    e = mesh.vertices[mesh.edges]
    return float(np.max(np.linalg.norm(e[:, 1] - e[:, 0], axis=1)))


def check_mesh_proper(mesh, ball):
    """Boundary vertices on dB and interior vertices inside B, within TOL_PROP_MESH."""
    Rm = ball.radius_model
    r = np.linalg.norm(mesh.vertices, axis=1)
    b = mesh.boundary_vertex_mask
    off = float(np.max(np.abs(r[b] - Rm))) if b.any() else 0.0
    if off > TOL_PROP_MESH * Rm:
        raise ConstructionError(f"mesh boundary is {off:.2e} away from the ball boundary")
    if np.any(r[~b] >= Rm * (1 + TOL_PROP_MESH)):
        raise ConstructionError("mesh interior leaves the ball")


def _mesh_boundary_frame(surface):
    mesh, ball = surface.mesh, surface.ball
    check_mesh_proper(mesh, ball)
    fit = fitted_shape(mesh, ball)
    bv = mesh.boundary_vertices
    X = mesh.vertices[bv]
    lam = sf.conformal_lambda(ball.kappa, X)
    # boundary tangent from loop neighbours, conormal T x n points out of the surface
    tang = np.zeros_like(mesh.vertices)
    for loop in mesh.boundary_loops:
        nxt, prv = np.roll(loop, -1), np.roll(loop, 1)
        tang[loop] = mesh.vertices[nxt] - mesh.vertices[prv]
    T = tang[bv] / np.linalg.norm(tang[bv], axis=1, keepdims=True)
    n = fit["n"][bv]
    mu_e = np.cross(T, n)
    mu_e -= np.einsum("ij,ij->i", mu_e, n)[:, None] * n
    mu_e /= np.linalg.norm(mu_e, axis=1, keepdims=True)
    nu = n / lam[:, None]
    mu = mu_e / lam[:, None]
    Nb, nubar, theta, cos_t, sin_t, fres = _frame_from_vectors(ball, X, nu, mu)
    _check_theta(theta)
    # h(mu, mu) from the fitted form in the same local frame used by the fit
    h = fit["h"][bv]
    hmm = np.empty(len(bv))
    for j, (nn, m) in enumerate(zip(n, mu_e)):
        e1 = np.cross(nn, [1.0, 0, 0] if abs(nn[0]) < 0.9 else [0, 1.0, 0])
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(nn, e1)
        c = np.array([m @ e1, m @ e2]) / lam[j]
        hmm[j] = c @ h[j] @ c
    p = ball.boundary_curvature
    q = p / sin_t + (cos_t / sin_t) * hmm
    hs = mesh_size(mesh)
    ed = euler_data(surface)
    kg_vertex = ed["turning"][bv]
    return BoundaryFrame(X, mu, nu, Nb, nubar, theta, kg_vertex, np.full(len(bv), np.nan), hmm, q,
                         float(np.max(np.abs(fit["H"]))), TOL_MIN_MESH * hs, TOL_ANGLE_MESH * hs, float(fres),
                         float("nan"))


# ---------------------------------------------------------------------------
# per-vertex data for assembly
# ---------------------------------------------------------------------------

@dataclass
class VertexData:
    """Per-vertex coefficients consumed by the assembly."""

    potential: np.ndarray  # |h|^2 + Ric(nu, nu)
    h2: np.ndarray
    H: np.ndarray
    normal: np.ndarray  # euclidean unit normal
    q: np.ndarray  # zero at interior vertices
    theta: np.ndarray  # nan at interior vertices
    route: str


def vertex_data(surface):
    """Coefficient data at mesh vertices (analytic when a patch is available)."""
    mesh, ball = surface.mesh, surface.ball
    if mesh is None:
        raise ArgumentError("vertex_data needs a meshed immersion", module="surface")
    mesh.check_quality()
    nv = mesh.n_vertices
    ric = 2.0 * ball.kappa
    q = np.zeros(nv)
    theta = np.full(nv, np.nan)
    bv = mesh.boundary_vertices
    if surface.patch is not None and mesh.params is not None:
        patch = surface.patch
        loc = patch.geometry(mesh.params)
        X = mesh.vertices[bv]
        nu = loc["n"][bv] / loc["lam"][bv, None]
        mi = patch.conormal(mesh.params[bv])
        mu = np.einsum("nki,ni->nk", loc["J"][bv], mi)
        hmm = np.einsum("ni,nij,nj->n", mi, loc["h"][bv], mi)
        _, _, th, cos_t, sin_t, _ = _frame_from_vectors(ball, X, nu, mu)
        _check_theta(th)
        q[bv] = ball.boundary_curvature / sin_t + (cos_t / sin_t) * hmm
        theta[bv] = th
        return VertexData(loc["h2"] + ric, loc["h2"], loc["H"], loc["n"], q, theta, "analytic")
    fit = fitted_shape(mesh, ball)
    fr = _mesh_boundary_frame(surface)
    q[bv] = fr.q
    theta[bv] = fr.theta
    return VertexData(fit["h2"] + ric, fit["h2"], fit["H"], fit["n"], q, theta, "fitted")


# ---------------------------------------------------------------------------
# Euler data
# ---------------------------------------------------------------------------

def euler_data(surface):
    """Area, boundary length, integrated curvatures and the Gauss-Bonnet residual.

    Gauss curvature is the angle defect at interior vertices and the boundary
    geodesic curvature is the turning angle ``pi - (angle sum)`` at boundary
    vertices. Lengths and areas use the conformal factor at edge/face midpoints.
    """
    mesh = surface.mesh if isinstance(surface, Immersion) else surface
    if mesh is None:
        raise ArgumentError("euler_data needs a mesh", module="surface")
    ball = surface.ball if isinstance(surface, Immersion) else sf.AmbientBall(sf.AmbientSpace(0), 1.0)
    if len(mesh.boundary_loops) == 0:
        raise TopologyError("closed mesh: a boundary is required")
    ang = mesh.corner_angles()
    asum = np.bincount(mesh.faces.ravel(), weights=ang.ravel(), minlength=mesh.n_vertices)
    b = mesh.boundary_vertex_mask
    defect = np.where(b, 0.0, 2 * np.pi - asum)
    turning = np.where(b, np.pi - asum, 0.0)
    k = ball.kappa
    V = mesh.vertices
    cen = V[mesh.faces].mean(axis=1)
    area = float(np.sum(mesh.face_areas() * sf.conformal_lambda(k, cen) ** 2))
    be = mesh.boundary_edges
    mid = 0.5 * (V[be[:, 0]] + V[be[:, 1]])
    length = float(np.sum(np.linalg.norm(V[be[:, 1]] - V[be[:, 0]], axis=1) * sf.conformal_lambda(k, mid)))
    chi = mesh.euler_characteristic()
    iK, ikg = float(defect.sum()), float(turning.sum())
    return {
        "area": area,
        "boundary_length": length,
        "int_K": iK,
        "int_kappa_g": ikg,
        "chi": int(chi),
        "gauss_bonnet_residual": float(iK + ikg - 2 * np.pi * chi),
        "defect": defect,
        "turning": turning,
    }
