"""Constant-curvature ambients in the conformal ball model.

All points and vectors are expressed in Cartesian model coordinates. The
ambient metric is ``lam(x)**2 * delta`` with

* flat:        lam = 1
* hyperbolic:  lam = 2 / (1 - |x|^2)   (Poincare ball)
* spherical:   lam = 2 / (1 + |x|^2)   (stereographic chart, south pole removed)

The formulas in this module are written against an array namespace ``xp`` so
that the same code serves numpy callers and the jax-traced surface code.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .errors import ArgumentError, DomainError

SPACE_NAMES = {"euclidean": 0, "hyperbolic": -1, "spherical": 1}
FIELD_KINDS = ("position_x", "killing_Y", "potential_V0", "potential_Va", "outward_normal_Nbar")

# chart validity away from the excluded pole of the spherical model
EPS_POLE = 1e-6


# ---------------------------------------------------------------------------
# closed-form ingredients, namespace agnostic
# ---------------------------------------------------------------------------

def conformal_lambda(kappa, x, xp=np):
    """Square root of the conformal factor at ``x`` (last axis = coordinates)."""
    if kappa == 0:
        return xp.ones(x.shape[:-1], dtype=x.dtype)
    r2 = xp.sum(x * x, axis=-1)
    return 2.0 / (1.0 + kappa * r2)


def grad_log_lambda(kappa, x, xp=np):
    """Euclidean gradient of ``u = log lam``."""
    if kappa == 0:
        return xp.zeros_like(x)
    r2 = xp.sum(x * x, axis=-1)
    return (-2.0 * kappa / (1.0 + kappa * r2))[..., None] * x


def potential_v0(kappa, x, xp=np):
    if kappa == 0:
        return xp.ones(x.shape[:-1], dtype=x.dtype)
    r2 = xp.sum(x * x, axis=-1)
    return (1.0 - kappa * r2) / (1.0 + kappa * r2)


def potential_va(kappa, x, a, xp=np):
    xa = xp.sum(x * a, axis=-1)
    if kappa == 0:
        return xa
    r2 = xp.sum(x * x, axis=-1)
    return 2.0 * xa / (1.0 + kappa * r2)


def killing_y(kappa, x, a, xp=np):
    """The Killing field associated with the constant vector ``a``."""
    if kappa == 0:
        return xp.broadcast_to(a, x.shape) * xp.ones_like(x)
    r2 = xp.sum(x * x, axis=-1)[..., None]
    xa = xp.sum(x * a, axis=-1)[..., None]
    return 0.5 * (1.0 - kappa * r2) * a + kappa * xa * x


def radial_unit_normal(kappa, x, xp=np):
    """Unit (in the ambient metric) radial field; the outward normal on spheres about 0."""
    r = xp.sqrt(xp.sum(x * x, axis=-1))
    lam = conformal_lambda(kappa, x, xp)
    return x / (r * lam)[..., None]


def conformal_connection(kappa, x, z, y, dzy, xp=np):
    """Levi-Civita derivative of ``y`` along ``z`` given the flat derivative ``dzy``.

    For ``g = e^{2u} delta``:
    nabla_Z Y = D_Z Y + Z(u) Y + Y(u) Z - <Z, Y> grad u.
    """
    gu = grad_log_lambda(kappa, x, xp)
    zu = xp.sum(z * gu, axis=-1)[..., None]
    yu = xp.sum(y * gu, axis=-1)[..., None]
    zy = xp.sum(z * y, axis=-1)[..., None]
    return dzy + zu * y + yu * z - zy * gu


def metric_pair(kappa, x, v, w, xp=np):
    lam = conformal_lambda(kappa, x, xp)
    return lam * lam * xp.sum(v * w, axis=-1)


# ---------------------------------------------------------------------------
# descriptors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AmbientSpace:
    curvature_sign: int

    def __post_init__(self):
        if self.curvature_sign not in (-1, 0, 1):
            raise ArgumentError("curvature_sign must be -1, 0 or +1", module="spaceform")

    @classmethod
    def from_name(cls, name):
        try:
            return cls(SPACE_NAMES[name])
        except KeyError:
            raise ArgumentError(f"unknown space {name!r}; expected one of {sorted(SPACE_NAMES)}",
                                module="spaceform") from None

    @property
    def name(self):
        return {0: "euclidean", -1: "hyperbolic", 1: "spherical"}[self.curvature_sign]

    def conformal_factor(self, x):
        """e^{2u} at the model point(s) ``x``."""
        x = np.asarray(x, dtype=float)
        return conformal_lambda(self.curvature_sign, x) ** 2


@dataclass(frozen=True)
class AmbientBall:
    """Geodesic ball of radius ``radius`` centred at the model origin."""

    space: AmbientSpace
    radius: float

    def __post_init__(self):
        R = float(self.radius)
        if not R > 0:
            raise ArgumentError("ball radius must be positive", module="spaceform")
        if self.space.curvature_sign == 1 and not R < np.pi:
            raise ArgumentError("spherical ball radius must lie in (0, pi)", module="spaceform")

    @classmethod
    def from_config(cls, block):
        return cls(AmbientSpace.from_name(block.get("space", "euclidean")), float(block.get("radius", 1.0)))

    def to_config(self):
        return {"space": self.space.name, "radius": float(self.radius)}

    @property
    def kappa(self):
        return self.space.curvature_sign

    @property
    def radius_model(self):
        R = self.radius
        return {0: R, -1: np.tanh(R / 2), 1: np.tan(R / 2)}[self.kappa]

    @property
    def boundary_curvature(self):
        """Principal curvature p(R) of the boundary sphere (all directions)."""
        R = self.radius
        return {0: 1.0 / R, -1: 1.0 / np.tanh(R), 1: 1.0 / np.tan(R)}[self.kappa]

    @property
    def boundary_mean_curvature(self):
        """Trace of h^{dB}: two principal directions on a 2-sphere."""
        return 2.0 * self.boundary_curvature

    @property
    def sr(self):
        """Ambient length of the position vector on the boundary: R, sinh R or sin R."""
        R = self.radius
        return {0: R, -1: np.sinh(R), 1: np.sin(R)}[self.kappa]

    def contains(self, x, tol=1e-9):
        r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
        ok = r <= self.radius_model * (1 + tol)
        if self.kappa == 1:
            ok &= r < 1.0 / EPS_POLE
        return ok

    def lam(self, x):
        return conformal_lambda(self.kappa, np.asarray(x, dtype=float))


@dataclass(frozen=True)
class AmbientField:
    kind: str
    direction: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ArgumentError(f"unknown field kind {self.kind!r}", module="spaceform")
        if self.kind in ("killing_Y", "potential_Va"):
            if self.direction is None:
                raise ArgumentError(f"{self.kind} needs a direction", module="spaceform")
            a = np.asarray(self.direction, dtype=float)
            if a.shape != (3,) or not np.isclose(np.linalg.norm(a), 1.0, atol=1e-12):
                raise ArgumentError("field direction must be a unit 3-vector", module="spaceform")

    @property
    def is_scalar(self):
        return self.kind.startswith("potential")


@dataclass(frozen=True)
class AmbientCurvature:
    """Constant-curvature tensors of a 3-dimensional space form."""

    sectional: float
    ric_unit: float  # Ric(v, v) for a unit vector v
    scalar: float

    def ric(self, ball, x, v):
        return self.ric_unit * metric_pair(ball.kappa, np.asarray(x, float), np.asarray(v, float),
                                           np.asarray(v, float))


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _field_fn(ball, field):
    k = ball.kappa
    a = None if field.direction is None else np.asarray(field.direction, dtype=float)
    if field.kind == "position_x":
        return lambda x: np.array(x, dtype=float)
    if field.kind == "killing_Y":
        return lambda x: killing_y(k, x, a)
    if field.kind == "potential_V0":
        return lambda x: potential_v0(k, x)
    if field.kind == "potential_Va":
        return lambda x: potential_va(k, x, a)
    return lambda x: radial_unit_normal(k, x)


def _check_point(ball, point):
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != 3:
        raise ArgumentError("points must be 3-vectors in model coordinates", module="spaceform")
    if not np.all(ball.contains(x)):
        raise DomainError(f"point {x.tolist()} lies outside the model ball of radius {ball.radius_model:.6g}")
    return x


def evaluate_field(ball, field, point):
    """Value of an ambient field at a model point (vector fields in model components)."""
    x = _check_point(ball, point)
    if field.kind == "outward_normal_Nbar" and np.linalg.norm(x) == 0:
        raise DomainError("the radial normal is undefined at the centre")
    val = _field_fn(ball, field)(x)
    if field.is_scalar:
        return float(val) if np.ndim(val) == 0 else np.asarray(val)
    return np.asarray(val, dtype=float)


def directional_derivative(fn, x, v):
    """Flat derivative of ``fn`` at ``x`` along ``v``.

    Fourth-order central differences at steps h and h/2 with one Richardson
    step, h = 1e-5 * (1 + |x|).
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    vn = np.linalg.norm(v)
    if vn == 0:
        return np.zeros_like(np.asarray(fn(x), dtype=float))
    e = v / vn
    h = 1e-5 * (1.0 + np.linalg.norm(x))

    def d4(step):
        return (-np.asarray(fn(x + 2 * step * e)) + 8 * np.asarray(fn(x + step * e))
                - 8 * np.asarray(fn(x - step * e)) + np.asarray(fn(x - 2 * step * e))) / (12 * step)

    coarse, fine = d4(h), d4(h / 2)
    return vn * (16 * fine - coarse) / 15


def covariant_derivative(ball, vector_fn, point, direction):
    """Ambient Levi-Civita derivative of the vector field ``vector_fn`` along ``direction``."""
    x = np.asarray(point, dtype=float)
    z = np.asarray(direction, dtype=float)
    y = np.asarray(vector_fn(x), dtype=float)
    dzy = directional_derivative(vector_fn, x, z)
    return conformal_connection(ball.kappa, x, z, y, dzy)


def symmetrized_derivative(ball, field, point, probe_pair):
    """1/2 (<nabla_Z Y, W> + <nabla_W Y, Z>) in the ambient metric."""
    if field.is_scalar:
        raise ArgumentError("symmetrized derivative needs a vector field", module="spaceform")
    x = _check_point(ball, point)
    z, w = (np.asarray(p, dtype=float) for p in probe_pair)
    for p in (z, w):
        if p.shape != (3,) or np.linalg.norm(p) < 1e-14:
            raise ArgumentError("probe vectors must be nonzero 3-vectors", module="spaceform")
    fn = _field_fn(ball, field)
    dz = covariant_derivative(ball, fn, x, z)
    dw = covariant_derivative(ball, fn, x, w)
    k = ball.kappa
    return float(0.5 * (metric_pair(k, x, dz, w) + metric_pair(k, x, dw, z)))


def killing_residual(ball, field, point, probe_pair):
    """Symmetrized covariant derivative of a Killing field; zero up to differencing error."""
    if field.kind != "killing_Y":
        raise ArgumentError("killing_residual expects a killing_Y field", module="spaceform")
    return symmetrized_derivative(ball, field, point, probe_pair)


def ambient_curvature(ball):
    k = float(ball.kappa)
    return AmbientCurvature(sectional=k, ric_unit=2.0 * k, scalar=6.0 * k)


def boundary_normal_curvature(ball, point, tangent):
    """h^{dB}(X, X) / |X|^2 at a boundary point, by differentiating the radial normal."""
    x = np.asarray(point, dtype=float)
    t = np.asarray(tangent, dtype=float)
    k = ball.kappa
    dn = covariant_derivative(ball, lambda y: radial_unit_normal(k, y), x, t)
    return float(metric_pair(k, x, dn, t) / metric_pair(k, x, t, t))
