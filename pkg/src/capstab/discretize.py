"""Piecewise-linear assembly of the stability form and its pairings.

Q(phi, phi) = int |grad phi|^2 - (|h|^2 + Ric(nu, nu)) phi^2 dA - int_dM q phi^2 ds.

Every matrix is assembled as an upper triangle plus its transpose, so the
stored matrices are exactly symmetric. Stiffness is kept as an edge list and
evaluated in difference form, which makes constants lie exactly in its kernel.
"""

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from . import spaceform as sf
from .errors import ArgumentError, DependencyError, PreconditionError
from .surface import Immersion, boundary_frame, mesh_size, vertex_data

MASS_MODES = ("consistent", "lumped")


@dataclass
class SymForm:
    """Symmetric bilinear form stored as strict upper triangle plus diagonal."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    diag: np.ndarray

    def matrix(self):
        n = len(self.diag)
        U = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(n, n)).tocsr()
        return (U + U.T + sp.diags(self.diag)).tocsr()

    def pair(self, x, y):
        off = self.vals * (x[self.rows] * y[self.cols] + x[self.cols] * y[self.rows])
        return float(np.sum(off) + np.sum(self.diag * (x * y)))


def _sym_from_entries(n, i, j, v):
    """Sum duplicate entries of a symmetric element scatter; (i, j) pairs are unordered."""
    lo, hi = np.minimum(i, j), np.maximum(i, j)
    d = lo == hi
    diag = np.bincount(lo[d], weights=v[d], minlength=n)
    U = sp.coo_matrix((v[~d], (lo[~d], hi[~d])), shape=(n, n)).tocsr()
    U.sum_duplicates()
    U = U.tocoo()
    return SymForm(U.row.astype(np.int64), U.col.astype(np.int64), U.data, diag)


@dataclass
class StabilityAssembly:
    """Matrices realizing Q, the mass pairings and the wetting constraint."""

    mesh: object
    ball: sf.AmbientBall
    edges: np.ndarray
    weights: np.ndarray  # cotan weights per edge
    pot: SymForm
    robin: np.ndarray  # diagonal of B_q
    mass: SymForm
    bmass: SymForm
    c: np.ndarray
    h: float
    mass_mode: str
    label: str = ""

    # -- matrices ------------------------------------------------------------
    @property
    def n(self):
        return len(self.c)

    @property
    def K(self):
        n = self.n
        e, w = self.edges, self.weights
        return SymForm(e[:, 0].copy(), e[:, 1].copy(), -w,
                       np.bincount(np.r_[e[:, 0], e[:, 1]], weights=np.r_[w, w], minlength=n)).matrix()

    @property
    def P(self):
        return self.pot.matrix()

    @property
    def Bq(self):
        return sp.diags(self.robin).tocsr()

    @property
    def M(self):
        return self.mass.matrix()

    @property
    def Bmass(self):
        return self.bmass.matrix()

    @property
    def A(self):
        """Matrix of Q: K - P - B_q."""
        return (self.K - self.P - self.Bq).tocsr()

    # -- forms ---------------------------------------------------------------
    def stiffness_pair(self, x, y):
        e = self.edges
        return float(np.sum(self.weights * ((x[e[:, 0]] - x[e[:, 1]]) * (y[e[:, 0]] - y[e[:, 1]]))))

    def export(self, directory):
        """Write K, P, Bq, M, Bmass and c as Matrix Market files."""
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for name in ("K", "P", "Bq", "M", "Bmass"):
            scipy.io.mmwrite(str(d / f"{name}.mtx"), getattr(self, name), symmetry="symmetric")
        scipy.io.mmwrite(str(d / "c.mtx"), self.c[:, None])
        return sorted(p.name for p in d.glob("*.mtx"))


def _check_vec(assembly, x, name):
    x = np.asarray(x, dtype=float)
    if x.shape != (assembly.n,):
        raise ArgumentError(f"{name} has shape {x.shape}, expected ({assembly.n},)", module="discretize")
    return x


def assemble(surface, mass="consistent", require_stationary=True, vdata=None):
    """Assemble the stability form on the surface's mesh.

    Parameters
    ----------
    surface : Immersion
        Must carry a mesh.
    mass : {"consistent", "lumped"}
        Quadrature of the potential and mass terms.
    require_stationary : bool
        Refuse surfaces that fail the stationarity check.
    vdata : VertexData, optional
        Precomputed vertex coefficients.
    """
    if mass not in MASS_MODES:
        raise ArgumentError(f"mass must be one of {MASS_MODES}", module="discretize")
    if not isinstance(surface, Immersion) or surface.mesh is None:
        raise DependencyError("assembly needs a meshed immersion with shape data")
    mesh, ball = surface.mesh, surface.ball
    if require_stationary:
        fr = boundary_frame(surface)
        if not fr.is_stationary:
            raise PreconditionError(
                f"surface is not stationary (max|H| = {fr.max_abs_H:.2e}, "
                f"theta deviation = {fr.theta_deviation:.2e})", module="discretize")
    vd = vdata if vdata is not None else vertex_data(surface)
    if vd.potential.shape != (mesh.n_vertices,):
        raise DependencyError("vertex data does not match the mesh")
    n = mesh.n_vertices
    V, F, k = mesh.vertices, mesh.faces, ball.kappa
    areas = mesh.face_areas()
    pot_v = vd.potential

    if mass == "consistent":
        # edge-midpoint rule with the conformal weight, exact for quadratics when flat
        I, J, Pv, Mv = [], [], [], []
        for a, b in ((0, 1), (1, 2), (2, 0)):
            ia, ib = F[:, a], F[:, b]
            mid = 0.5 * (V[ia] + V[ib])
            lam2 = sf.conformal_lambda(k, mid) ** 2
            wm = areas / 3.0 * lam2 / 4.0
            fm = 0.5 * (pot_v[ia] + pot_v[ib])
            # phi = 1/2 at both endpoints of this midpoint
            for x, y in ((ia, ia), (ib, ib), (ia, ib)):
                I.append(x)
                J.append(y)
                Mv.append(wm)
                Pv.append(wm * fm)
        I, J = np.concatenate(I), np.concatenate(J)
        massf = _sym_from_entries(n, I, J, np.concatenate(Mv))
        potf = _sym_from_entries(n, I, J, np.concatenate(Pv))
    else:
        lam2 = sf.conformal_lambda(k, V) ** 2
        dual = np.bincount(F.ravel(), weights=np.repeat(areas / 3.0, 3), minlength=n) * lam2
        empty = np.zeros(0, dtype=np.int64)
        massf = SymForm(empty, empty, np.zeros(0), dual)
        potf = SymForm(empty, empty, np.zeros(0), dual * pot_v)

    be = mesh.boundary_edges
    ia, ib = be[:, 0], be[:, 1]
    L = np.linalg.norm(V[ib] - V[ia], axis=1) * sf.conformal_lambda(k, 0.5 * (V[ia] + V[ib]))
    robin = np.bincount(ia, weights=0.5 * L * vd.q[ia], minlength=n) + \
        np.bincount(ib, weights=0.5 * L * vd.q[ib], minlength=n)
    bm = _sym_from_entries(n, np.r_[ia, ib, ia], np.r_[ia, ib, ib], np.r_[L / 3, L / 3, L / 6])
    c = bm.matrix() @ np.ones(n)
    label = surface.label if surface.family is not None else "mesh"
    return StabilityAssembly(mesh, ball, mesh.edges, mesh.cotan_weights(), potf, robin, massf, bm, c,
                             mesh_size(mesh), mass, label)


def evaluate_Q(assembly, phi, psi):
    """Bilinear stability form; symmetric in its arguments bit for bit."""
    x = _check_vec(assembly, phi, "phi")
    y = _check_vec(assembly, psi, "psi")
    robin = float(np.sum(assembly.robin * (x * y)))
    return assembly.stiffness_pair(x, y) - assembly.pot.pair(x, y) - robin


def constraint_value(assembly, phi):
    """c^T phi, the boundary integral of the piecewise-linear function."""
    x = _check_vec(assembly, phi, "phi")
    return float(assembly.c @ x)


def mass_pair(assembly, phi, psi):
    return assembly.mass.pair(_check_vec(assembly, phi, "phi"), _check_vec(assembly, psi, "psi"))
