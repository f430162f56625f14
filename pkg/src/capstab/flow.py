"""Wetting-area-preserving variations and a finite-difference second variation.

Given a normal datum phi with zero boundary integral, the surface is moved
along the flow psi of an ambient field

    Z(y) = N(y) - omega(|y|) <N, y>/<tau, y> tau,    tau = y - <y, n> n,

where N is an ambient-unit extension of the surface normal and omega is a
smooth cutoff equal to one near dB. Z is tangent to dB, and along M it differs
from the normal by a tangent vector. Points move by flow time u(t, p), where on
the boundary du/dt = phi E(0)/E(u) and E(u) is the area swept on dB per unit
flow time. With E(0) = 1/sin(theta) constant this keeps the swept (wetting)
area at zero for all t, so A''(0) equals the stability form.
"""

import functools
from dataclasses import dataclass, field

import numpy as np

from . import spaceform as sf
from ._jax import jax, jnp
from .errors import FlowError, NumericalError, PreconditionError
from .surface import MAPS, boundary_frame

TOL_PROP = 1e-8
CHUNK = 2048


def smooth_step(x):
    """C-infinity step: 0 for x <= 0, 1 for x >= 1."""
    def f(z):
        pos = z > 0
        return jnp.where(pos, jnp.exp(-1.0 / jnp.where(pos, z, 1.0)), 0.0)
    a, b = f(x), f(1.0 - x)
    return a / (a + b)


def _normal_extension(mapname, prm):
    """Euclidean unit normal field near the surface, matching the patch orientation."""
    if mapname == "plane":
        return lambda y: jnp.array([0.0, 0.0, 1.0])
    if mapname == "cap":
        s, C, rho, sig = prm

        def n_cap(y):
            d = y - jnp.array([0.0, 0.0, C])
            return sig * d / jnp.linalg.norm(d)
        return n_cap
    c, a = prm

    def n_cat(y):
        rxy = jnp.sqrt(y[0] ** 2 + y[1] ** 2)
        t = y[2] / (a * c)
        return jnp.array([-y[0] / rxy, -y[1] / rxy, jnp.sinh(t)]) / jnp.cosh(t)
    return n_cat


def rk4(f, y0, T, n):
    h = T / n

    def step(y, _):
        k1 = f(y)
        k2 = f(y + 0.5 * h * k1)
        k3 = f(y + 0.5 * h * k2)
        k4 = f(y + h * k3)
        return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4), None

    return jax.lax.scan(step, y0, None, length=n)[0]


def gauss_legendre(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def radial_rule(patch, n):
    """Composite Gauss rule in the radial-like coordinate, split at the collar breakpoints."""
    if patch.domain == "disk":
        br = [0.0, 0.5, 0.9, 1.0]
    else:
        br = list(patch.t_half * np.array([-1.0, -0.9, -0.5, 0.5, 0.9, 1.0]))
    parts = [gauss_legendre(n, a, b) for a, b in zip(br[:-1], br[1:])]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def chunked(fn, arrays, const=(), chunk=CHUNK):
    """Apply a vmapped jax function in fixed-size chunks so one compilation serves all sizes."""
    n = len(arrays[0])
    m = -(-n // chunk) * chunk
    padded = [np.concatenate([a, np.repeat(a[-1:], m - n, axis=0)]) for a in arrays]
    out = [np.asarray(fn(*const, *(jnp.asarray(p[i:i + chunk]) for p in padded))) for i in range(0, m, chunk)]
    return np.concatenate(out)[:n]


@dataclass
class FDResult:
    Q: float
    Q_mesh: float
    fd: float
    fd_plain: dict
    discrepancy: float
    observed_order: float
    wetting_area_max: float
    boundary_drift_max: float
    dt: tuple
    quadrature: tuple
    details: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "Q": float(self.Q),
            "Q_mesh": None if self.Q_mesh is None else float(self.Q_mesh),
            "fd_second_derivative": float(self.fd),
            "discrepancy": float(self.discrepancy),
            "observed_order": float(self.observed_order),
            "order_plain": float(self.details.get("order_plain", float("nan"))),
            "wetting_area_max": float(self.wetting_area_max),
            "boundary_drift_max": float(self.boundary_drift_max),
            "dt": [float(x) for x in self.dt],
        }


class WettingFlow:
    """Wetting-area-preserving deformation of an analytic patch.

    Parameters
    ----------
    surface : Immersion
        Analytic, stationary.
    datum : callable
        Normal speed as a jax function of the model position, phi(X).
    n_flow, n_ode : int
        RK4 steps for the ambient flow and for the boundary reparametrisation.
    """

    def __init__(self, surface, datum, n_flow=8, n_ode=8, collar=0.2):
        if surface.patch is None:
            raise PreconditionError("the wetting flow needs an analytic patch", module="identities")
        self.surface = surface
        self.patch = surface.patch
        self.ball = surface.ball
        self.datum = datum
        self.n_flow, self.n_ode = n_flow, n_ode
        fr = boundary_frame(surface)
        if not fr.is_stationary:
            raise PreconditionError("surface is not stationary")
        self.frame = fr
        self.theta = fr.theta_mean
        self.kappa = self.ball.kappa
        self.Rm = self.ball.radius_model
        self.width = collar * self.Rm
        prm = tuple(float(x) for x in self.patch.prm)
        self._map = functools.partial(MAPS[self.patch.mapname], jnp.asarray(prm))
        self._next = _normal_extension(self.patch.mapname, prm)
        self._build()

    # -- ambient field and flow ---------------------------------------------
    def Z(self, y):
        k = self.kappa
        n = self._next(y)
        lam = sf.conformal_lambda(k, y, jnp)
        N = n / lam
        tau = y - jnp.dot(y, n) * n
        r = jnp.linalg.norm(y)
        om = smooth_step((r - (self.Rm - self.width)) / (0.8 * self.width))
        return N - om * (jnp.dot(N, y) / jnp.dot(tau, y)) * tau

    def psi(self, u, y):
        return rk4(lambda z: u * self.Z(z), y, 1.0, self.n_flow)

    # -- domain bookkeeping -------------------------------------------------
    def _components(self):
        """(sign, boundary point map s -> p) for each boundary component."""
        if self.patch.domain == "disk":
            return [(1.0, lambda s: jnp.array([jnp.cos(s), jnp.sin(s)]))]
        tb = self.patch.t_half
        return [(1.0, lambda s: jnp.array([tb, s])), (-1.0, lambda s: jnp.array([-tb, s]))]

    def _point(self, q):
        """Quadrature coordinates (radial-like, angle) -> parameter point."""
        if self.patch.domain == "disk":
            return jnp.array([q[0] * jnp.cos(q[1]), q[0] * jnp.sin(q[1])])
        return q

    # -- compiled pieces ----------------------------------------------------
    def _build(self):
        k = self.kappa
        comps = self._components()

        def sweep_rate(u, s, bp):
            """E(u, s): ambient area swept on dB per unit flow time, per unit length of dM."""
            y = self._map(bp(s))
            dy = jax.jacfwd(lambda z: self._map(bp(z)))(s)
            yu, dyu = jax.jvp(lambda z: self.psi(u, z), (y,), (dy,))
            lam_u = sf.conformal_lambda(k, yu, jnp)
            lam_0 = sf.conformal_lambda(k, y, jnp)
            return lam_u ** 2 * jnp.linalg.norm(jnp.cross(self.Z(yu), dyu)) / (lam_0 * jnp.linalg.norm(dy))

        def boundary_u(t, s, bp):
            phi_b = self.datum(self._map(bp(s)))
            e0 = sweep_rate(0.0, s, bp)
            return rk4(lambda u: phi_b * e0 / sweep_rate(u, s, bp), jnp.asarray(0.0), t, self.n_ode)

        self._sweep = [jax.jit(jax.vmap(functools.partial(sweep_rate, bp=bp), in_axes=(0, 0))) for _, bp in comps]
        self._boundary_u = [jax.jit(jax.vmap(functools.partial(boundary_u, bp=bp), in_axes=(None, 0)))
                            for _, bp in comps]
        self._bpos = [jax.jit(jax.vmap(lambda u, s, bp=bp: self.psi(u, self._map(bp(s))))) for _, bp in comps]

        def integrand(t, q, ub, dub):
            """Ambient area density at quadrature point q for flow parameter t."""
            P = self._point(q)
            x0 = self._map(P)
            xq = jax.jacfwd(lambda z: self._map(self._point(z)))(q)
            phi_fn = lambda z: self.datum(self._map(self._point(z)))  # noqa: E731
            phi, dphi = phi_fn(q), jax.grad(phi_fn)(q)
            u, du = t * phi, t * dphi
            for j, (chi_fn, (_, bp)) in enumerate(zip(self._collars_fn(), comps)):
                chi = chi_fn(q)
                dchi = jax.grad(chi_fn)(q)
                pb = lambda a, bp=bp: self.datum(self._map(bp(a)))  # noqa: E731
                corr = ub[j] - t * pb(q[1])
                dcorr = jnp.array([0.0, dub[j] - t * jax.grad(pb)(q[1])])
                u = u + chi * corr
                du = du + dchi * corr + chi * dcorr
            X = self.psi(u, x0)
            Dpsi = jax.jacfwd(lambda z: self.psi(u, z))(x0)
            Xq = Dpsi @ xq + jnp.outer(self.Z(X), du)
            lam = sf.conformal_lambda(k, X, jnp)
            return jnp.stack([lam ** 2 * jnp.linalg.norm(jnp.cross(Xq[:, 0], Xq[:, 1])), jnp.linalg.norm(X)])

        self._integrand = jax.jit(jax.vmap(integrand, in_axes=(None, 0, 0, 0)))

    def _collars_fn(self):
        if self.patch.domain == "disk":
            return [lambda q: smooth_step((q[0] - 0.5) / 0.4)]
        tb = self.patch.t_half
        return [lambda q: smooth_step((q[0] - 0.5 * tb) / (0.4 * tb)),
                lambda q: smooth_step((-q[0] - 0.5 * tb) / (0.4 * tb))]

    # -- public quantities --------------------------------------------------
    def boundary_times(self, t, n_ang):
        s = 2 * np.pi * np.arange(n_ang) / n_ang
        return s, np.stack([chunked(f, [s], (float(t),), 256) for f in self._boundary_u])

    def area(self, t, n_rad, n_ang):
        s, ub = self.boundary_times(t, n_ang)
        # spectral derivative in the angle of the periodic boundary times
        kw = np.fft.fftfreq(n_ang, d=1.0 / n_ang)
        if n_ang % 2 == 0:
            kw[n_ang // 2] = 0.0
        dub = np.real(np.fft.ifft(1j * kw * np.fft.fft(ub, axis=1), axis=1))
        r, wr = radial_rule(self.patch, n_rad)
        R, S = np.meshgrid(r, s, indexing="ij")
        q = np.c_[R.ravel(), S.ravel()]
        j = np.tile(np.arange(n_ang), len(r))
        vals = chunked(self._integrand, [q, ub[:, j].T, dub[:, j].T], (float(t),))
        if np.max(vals[:, 1]) > self.Rm * (1 + TOL_PROP):
            raise FlowError(f"flow left the ball at t = {t:g}")
        w = np.repeat(wr, n_ang) * (2 * np.pi / n_ang)
        return float(np.sum(vals[:, 0] * w))

    def wetting_area(self, t, n_ang, n_gauss=8):
        """Area swept on dB by the boundary up to time t, by direct quadrature."""
        s, ub = self.boundary_times(t, n_ang)
        total = 0.0
        x, w = np.polynomial.legendre.leggauss(n_gauss)
        for j, f in enumerate(self._sweep):
            for xi, wi in zip(x, w):
                v = 0.5 * (xi + 1) * ub[j]
                ds = self._speed(j, s)
                total += float(np.sum(0.5 * wi * ub[j] * np.asarray(f(jnp.asarray(v), jnp.asarray(s))) * ds))
        return total * (2 * np.pi / n_ang)

    def _speed(self, j, s):
        bp = self._components()[j][1]
        k = self.kappa
        fn = jax.vmap(lambda z: (self._map(bp(z)), jax.jacfwd(lambda a: self._map(bp(a)))(z)))
        y, dy = (np.asarray(a) for a in fn(jnp.asarray(s)))
        return sf.conformal_lambda(k, y) * np.linalg.norm(dy, axis=1)

    def boundary_drift(self, t, n_ang):
        s, ub = self.boundary_times(t, n_ang)
        out = 0.0
        for j, f in enumerate(self._bpos):
            Y = np.asarray(f(jnp.asarray(ub[j]), jnp.asarray(s)))
            out = max(out, float(np.max(np.abs(np.linalg.norm(Y, axis=1) - self.Rm))))
        return out


def quadrature_Q(surface, datum, n_rad, n_ang):
    """Stability form of a smooth datum by Gauss (radial) x trapezoid (angle) quadrature."""
    patch, ball = surface.patch, surface.ball
    k = ball.kappa
    mapf = functools.partial(MAPS[patch.mapname], jnp.asarray(tuple(float(x) for x in patch.prm)))
    disk = patch.domain == "disk"

    def point(q):
        return jnp.array([q[0] * jnp.cos(q[1]), q[0] * jnp.sin(q[1])]) if disk else q

    def dens(q):
        J = jax.jacfwd(lambda z: mapf(point(z)))(q)
        X = mapf(point(q))
        lam = sf.conformal_lambda(k, X, jnp)
        g = lam * lam * (J.T @ J)
        dphi = jax.grad(lambda z: datum(mapf(point(z))))(q)
        return jnp.sqrt(jnp.linalg.det(g)), dphi @ jnp.linalg.solve(g, dphi), datum(X)

    r, wr = radial_rule(patch, n_rad)
    s = 2 * np.pi * np.arange(n_ang) / n_ang
    R, S = np.meshgrid(r, s, indexing="ij")
    q = np.c_[R.ravel(), S.ravel()]
    dens_v = jax.jit(jax.vmap(lambda z: jnp.stack(dens(z))))
    sg, grad2, phi = chunked(dens_v, [q]).T
    P = np.asarray(jax.vmap(point)(jnp.asarray(q)))
    h2 = patch.geometry(P)["h2"]
    w = np.repeat(wr, n_ang) * (2 * np.pi / n_ang)
    interior = float(np.sum(w * sg * (grad2 - (h2 + 2 * k) * phi ** 2)))
    fr = boundary_frame(surface, n_ang)
    phib = np.asarray(jax.vmap(datum)(jnp.asarray(fr.points)))
    speed = []
    for Pb, sb, curve in patch.boundary_params(n_ang):
        d1, _ = patch.kernels["curve_accel"](curve)(patch.prm_array(), jnp.asarray(sb))
        X = patch.position(Pb)
        speed.append(sf.conformal_lambda(k, X) * np.linalg.norm(np.asarray(d1), axis=1))
    ds = np.concatenate(speed) * (2 * np.pi / n_ang)
    return interior - float(np.sum(fr.q * phib ** 2 * ds))


def boundary_integral(surface, datum, n_ang=512):
    patch, k = surface.patch, surface.ball.kappa
    total = 0.0
    for Pb, sb, curve in patch.boundary_params(n_ang):
        d1, _ = patch.kernels["curve_accel"](curve)(patch.prm_array(), jnp.asarray(sb))
        X = patch.position(Pb)
        ds = sf.conformal_lambda(k, X) * np.linalg.norm(np.asarray(d1), axis=1) * (2 * np.pi / n_ang)
        total += float(np.sum(np.asarray(jax.vmap(datum)(jnp.asarray(X))) * ds))
    return total


def second_variation_fd(surface, datum, dt=(0.02, 0.01), assembly=None, rtol_quad=1e-10,
                        n_rad_max=512, n_ang_max=256):
    """Compare A''(0) along the wetting-preserving flow with the stability form.

    Parameters
    ----------
    surface : Immersion
        Analytic stationary surface.
    datum : callable
        jax function of the model position giving the normal speed.
    dt : sequence of float
        Steps; the second difference at each step uses t in {0, +-dt, +-2dt}.
    assembly : StabilityAssembly, optional
        If given, also report the mesh value of Q for the vertex-sampled datum.

    Returns
    -------
    FDResult
        ``fd`` is the Richardson-extrapolated second difference at the smallest
        step; ``observed_order`` is the convergence exponent of that value
        between the two smallest steps (``details["order_plain"]`` gives the
        exponent of the plain second difference).
    """
    bint = boundary_integral(surface, datum)
    if abs(bint) > 1e-8:
        raise PreconditionError(f"datum is not admissible: boundary integral {bint:.3e}")
    flow = WettingFlow(surface, datum)
    # quadrature resolution: double until the most deformed area settles
    t_star = 2 * max(dt)
    nr, na = 16, 32
    prev = flow.area(t_star, nr, na)
    while True:
        nr, na = 2 * nr, min(2 * na, n_ang_max)
        cur = flow.area(t_star, nr, na)
        if abs(cur - prev) <= rtol_quad * abs(cur):
            break
        if nr >= n_rad_max:
            raise NumericalError(f"area quadrature did not settle: change {abs(cur - prev):.2e}", module="identities")
        prev = cur
    Q = quadrature_Q(surface, datum, nr, na)
    A0 = flow.area(0.0, nr, na)
    cache = {0.0: A0}

    def A(t):
        if t not in cache:
            cache[t] = flow.area(t, nr, na)
        return cache[t]

    plain, rich = {}, {}
    drift = wet = 0.0
    for h in sorted(dt, reverse=True):
        d1 = (A(h) - 2 * A0 + A(-h)) / h ** 2
        d2 = (A(2 * h) - 2 * A0 + A(-2 * h)) / (2 * h) ** 2
        plain[h] = d1
        rich[h] = (4 * d1 - d2) / 3
        for t in (-2 * h, 2 * h):
            drift = max(drift, flow.boundary_drift(t, na))
            wet = max(wet, abs(flow.wetting_area(t, na)))
    if drift > TOL_PROP * max(1.0, flow.Rm):
        raise FlowError(f"boundary left dB by {drift:.2e}")
    hs = sorted(dt)
    fd = rich[hs[0]]

    def order(vals):
        if len(hs) < 2:
            return float("nan")
        e_small, e_big = abs(vals[hs[0]] - Q), abs(vals[hs[1]] - Q)
        return float(np.log(e_big / e_small) / np.log(hs[1] / hs[0])) if e_small > 0 else float("inf")

    qm = None
    if assembly is not None:
        from .discretize import evaluate_Q
        v = np.asarray(jax.vmap(datum)(jnp.asarray(assembly.mesh.vertices)))
        qm = evaluate_Q(assembly, v, v)
    return FDResult(Q, qm, fd, plain, abs(fd - Q), order(rich), wet, drift, tuple(dt), (nr, na),
                    {"richardson": rich, "boundary_integral": bint, "order_plain": order(plain)})
