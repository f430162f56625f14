"""Mesh topology, discrete harmonic 1-forms, index lower bounds and (g, r) predicates.

Harmonic fields are computed as edge cochains (discrete 1-forms) that are
closed on every face and co-closed with respect to the cotan Hodge star.

* T-type (tangent along the boundary): co-closed at every vertex, which
  imposes the zero normal component weakly. Represents absolute cohomology.
* N-type (normal along the boundary): vanishes on boundary edges and is
  co-closed at interior vertices. Represents relative cohomology.

Both spaces have dimension 2g + r - 1 on a connected surface with boundary.
Closed representatives come from a tree-cotree decomposition, and the exact
part is removed by a Poisson solve. The Hodge star on 1-forms is conformally
invariant in two dimensions, so the euclidean cotan weights serve every ambient.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_tree
from scipy.sparse.linalg import spsolve

from .errors import ArgumentError, NotApplicableError, NumericalError, TopologyError

CONDITIONS = ("N", "T")


@dataclass
class TopologyReport:
    chi: int
    genus: int
    boundary_components: int
    dim_H1_rel: int
    predicates: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "euler_characteristic": self.chi,
            "genus": self.genus,
            "boundary_components": self.boundary_components,
            "dim_H1_rel": self.dim_H1_rel,
            "predicates": {k: self.predicates[k] for k in sorted(self.predicates)},
        }


def topology_report(mesh):
    """Genus, boundary count and Euler characteristic of a connected orientable mesh."""
    r = len(mesh.boundary_loops)
    if r == 0:
        raise TopologyError("closed mesh: a boundary is required")
    if mesh.n_components() != 1:
        raise TopologyError("mesh is not connected")
    chi = mesh.euler_characteristic()
    twog = 2 - chi - r
    if twog < 0 or twog % 2:
        raise TopologyError(f"inconsistent counts: chi = {chi}, r = {r}")
    g = twog // 2
    return TopologyReport(chi, g, r, 2 * g + r - 1)


# ---------------------------------------------------------------------------
# index bounds and topological predicates
# ---------------------------------------------------------------------------

def _bound(value, status, reason=""):
    out = {"bound": max(0.0, float(value)), "raw": float(value), "status": status}
    if reason:
        out["reason"] = reason
    return out


def _na(reason):
    return {"bound": None, "raw": None, "status": "not-applicable", "reason": reason}


def index_bounds(report, ball, d=None):
    """Clamped Morse index lower bounds and (g, r) admissibility for stable surfaces.

    Parameters
    ----------
    report : TopologyReport
    ball : AmbientBall
    d : int, optional
        Dimension of a flat space isometrically containing a curved ambient.
        Used only for the general bound, whose curvature hypothesis is then
        assumed rather than checked.

    Returns
    -------
    dict
        Bound id -> record with ``bound`` (clamped at 0), ``status`` and
        ``reason`` when not applicable. The predicates ``thm0.3`` and
        ``thm0.4`` report whether a *stable* surface of this topology is
        allowed.
    """
    g, r = report.genus, report.boundary_components
    m = 2 * g + r
    k = ball.kappa
    hB = ball.boundary_curvature
    out = {}
    if k == 0:
        out["dim-2-R"] = _bound((m - 4) / 3.0, "applies")
        out["cor-7"] = _bound(2.0 / 6.0 * (m - 1) - 1, "applies")
        out["thm-6"] = _bound(2.0 / 6.0 * (m - 1) - 1, "applies")
        out["thm-7-p"] = _bound((m - 1) / 3.0 - 1, "applies")
        out["dim=2-S"] = _na("ambient is not spherical")
    elif k > 0:
        mean_convex = hB >= -1e-12
        status = "applies" if mean_convex else "not-applicable"
        if mean_convex:
            out["dim=2-S"] = _bound((m - 5) / 4.0, status)
            out["thm-7-p"] = _bound((m - 1) / 4.0 - 1, status)
        else:
            out["dim=2-S"] = _na("geodesic ball of radius > pi/2 is not mean convex")
            out["thm-7-p"] = _na("geodesic ball of radius > pi/2 is not mean convex")
        out["dim-2-R"] = _na("ambient is not flat")
        out["cor-7"] = _na("ambient is not flat")
        if d is not None and mean_convex:
            out["thm-6"] = _bound(2.0 / (d * (d - 1)) * (m - 1) - 1, "conditional",
                                  "curvature hypothesis assumed, not verified")
        else:
            out["thm-6"] = _na("no flat embedding dimension supplied")
    else:
        for key in ("dim-2-R", "dim=2-S", "cor-7", "thm-7-p"):
            out[key] = _na("no bound for hyperbolic ambients")
        if d is not None:
            out["thm-6"] = _bound(2.0 / (d * (d - 1)) * (m - 1) - 1, "conditional",
                                  "curvature hypothesis assumed, not verified")
        else:
            out["thm-6"] = _na("no flat embedding dimension supplied")

    # (g, r) restrictions for stable surfaces
    ric_ok = k >= 0
    h_ok = hB >= -1e-12
    if ric_ok and h_ok:
        small = g in (0, 1) and r in (1, 2, 3)
        # g = 2, r = 1 needs h^dB = 0 and scalar - Ric(nu, nu) = 4 kappa = 0 at once
        exceptional = (g, r) == (2, 1) and abs(hB) < 1e-12 and k == 0
        out["thm0.3"] = {"admissible": bool(small or exceptional), "status": "applies"}
        lim = 4 if g % 2 == 0 else 5
        out["thm0.4"] = {"admissible": bool(g + r / 2.0 < lim), "status": "applies"}
    else:
        why = "Ric < 0" if not ric_ok else "boundary not convex"
        out["thm0.3"] = {"admissible": None, "status": "not-applicable", "reason": why}
        out["thm0.4"] = {"admissible": None, "status": "not-applicable", "reason": why}
    report.predicates = out
    return out


def bound_violations(index, predicates):
    """Theorem ids whose applicable lower bound exceeds ``index``."""
    return sorted(k for k, v in predicates.items()
                  if v.get("bound") is not None and v["status"] == "applies" and index < v["bound"] - 1e-12)


# ---------------------------------------------------------------------------
# discrete harmonic fields
# ---------------------------------------------------------------------------

@dataclass
class HarmonicBasis:
    condition: str
    cochains: np.ndarray  # (n_edges, dim)
    face_vectors: np.ndarray  # (dim, n_faces, 3)
    dimension: int
    closed_residual: float
    coclosed_residual: float
    boundary_residual: float

    def vertex_vectors(self, mesh, k, normals=None):
        """Area-weighted vertex average of the k-th field, projected to the tangent plane."""
        a = mesh.face_areas()
        F = mesh.faces
        out = np.zeros((mesh.n_vertices, 3))
        wsum = np.bincount(F.ravel(), weights=np.repeat(a, 3), minlength=mesh.n_vertices)
        for j in range(3):
            np.add.at(out, F[:, j], a[:, None] * self.face_vectors[k])
        out /= wsum[:, None]
        if normals is not None:
            out -= np.einsum("ij,ij->i", out, normals)[:, None] * normals
        return out


def _operators(mesh):
    E, F = mesh.edges, mesh.faces
    ne, nv, nf = len(E), mesh.n_vertices, len(F)
    d0 = sp.csr_matrix((np.r_[-np.ones(ne), np.ones(ne)], (np.r_[np.arange(ne), np.arange(ne)],
                                                            np.r_[E[:, 0], E[:, 1]])), shape=(ne, nv))
    sign = np.where(F[:, [0, 1, 2]] < F[:, [1, 2, 0]], 1.0, -1.0)
    d1 = sp.csr_matrix((sign.ravel(), (np.repeat(np.arange(nf), 3), mesh.face_edges.ravel())), shape=(nf, ne))
    return d0, d1, sign


def _tree_edges(n_nodes, a, b, ids, root):
    """Edge ids of a BFS spanning tree of the multigraph (a, b, ids)."""
    key = np.minimum(a, b) * (n_nodes + 1) + np.maximum(a, b)
    _, first = np.unique(key, return_index=True)
    a, b, ids = a[first], b[first], ids[first]
    G = sp.coo_matrix((ids + 1.0, (a, b)), shape=(n_nodes, n_nodes)).tocsr()
    G = G.maximum(G.T)
    T = breadth_first_tree(G, root, directed=False).tocoo()
    present = np.unique(np.r_[a, b, root])
    if T.nnz != len(present) - 1:
        raise TopologyError("graph is not connected")
    return np.asarray(T.data - 1.0).round().astype(np.int64)


def _edge_faces(mesh, outside):
    """The two faces of every edge; boundary edges get ``outside`` as second face."""
    ne, nf = len(mesh.edges), len(mesh.faces)
    e = mesh.face_edges.T.ravel()
    f = np.tile(np.arange(nf), 3)
    order = np.argsort(e, kind="stable")
    e, f = e[order], f[order]
    start = np.searchsorted(e, np.arange(ne))
    fa = f[start]
    nxt = np.minimum(start + 1, len(e) - 1)
    fb = np.where((start + 1 < len(e)) & (e[nxt] == np.arange(ne)), f[nxt], outside)
    return fa, fb


def _closed_generators(mesh, condition, d1):
    """Closed cochains representing a cohomology basis, by tree-cotree."""
    E = mesh.edges
    ne, nv, nf = len(E), mesh.n_vertices, len(mesh.faces)
    bmask = mesh.boundary_edge_mask
    if condition == "T":
        allowed = np.ones(ne, dtype=bool)
        node = np.arange(nv)
        n_nodes = nv
    else:
        allowed = ~bmask
        node = np.where(mesh.boundary_vertex_mask, nv, np.arange(nv))
        n_nodes = nv + 1
    a, b = node[E[:, 0]], node[E[:, 1]]
    cand = np.flatnonzero(allowed & (a != b))
    tree = _tree_edges(n_nodes, a[cand], b[cand], cand, 0 if condition == "T" else nv)
    in_tree = np.zeros(ne, dtype=bool)
    in_tree[tree] = True

    # dual graph on faces (plus a virtual outer node for T-type)
    virtual = nf
    dual_ok = allowed & ~in_tree
    fa, fb = _edge_faces(mesh, virtual)
    n_dual = nf + 1 if condition == "T" else nf
    cand = np.flatnonzero(dual_ok & (fb < n_dual))
    cot = _tree_edges(n_dual, fa[cand], fb[cand], cand, virtual if condition == "T" else 0)
    in_cot = np.zeros(ne, dtype=bool)
    in_cot[cot] = True
    left = np.flatnonzero(allowed & ~in_tree & ~in_cot)
    expect = 1 - mesh.euler_characteristic()
    if len(left) != expect:
        raise NumericalError(f"tree-cotree produced {len(left)} generators, expected {expect}",
                             module="topology")
    if len(left) == 0:
        return np.zeros((ne, 0))
    # solve the face closedness equations for the cotree values
    rows = np.arange(nf)
    if condition == "N":
        rows = rows[1:]  # root face equation follows from the others
    A = d1[rows][:, cot].tocsc()
    G = np.zeros((ne, len(left)))
    G[left, np.arange(len(left))] = 1.0
    rhs = -(d1[rows][:, left]).toarray()
    G[cot] = spsolve(A, rhs).reshape(len(cot), -1)
    return G


def _face_vectors(mesh, omega, sign):
    """Piecewise-constant vectors xi with <xi, e> = omega(e) on each face (least squares)."""
    V, F = mesh.vertices, mesh.faces
    P = V[F]
    Ev = np.stack([P[:, 1] - P[:, 0], P[:, 2] - P[:, 1], P[:, 0] - P[:, 2]], axis=1)  # (nf, 3, 3)
    B = Ev[:, :2]  # basis of the face plane
    EB = np.einsum("fki,fli->fkl", Ev, B)  # (nf, 3, 2)
    lhs = np.einsum("fkl,fkm->flm", EB, EB)
    vals = omega[mesh.face_edges] * sign  # (nf, 3) directed edge values
    rhs = np.einsum("fkl,fk->fl", EB, vals)
    c = np.linalg.solve(lhs, rhs[..., None])[..., 0]
    return np.einsum("fl,fli->fi", c, B)


def harmonic_basis(mesh, condition):
    """Basis of discrete harmonic fields with the requested boundary condition.

    Parameters
    ----------
    mesh : TriMesh
    condition : {"N", "T"}
        "N": normal along the boundary; "T": tangent along the boundary.
    """
    if condition not in CONDITIONS:
        raise ArgumentError(f"condition must be one of {CONDITIONS}", module="topology")
    rep = topology_report(mesh)
    d0, d1, sign = _operators(mesh)
    G = _closed_generators(mesh, condition, d1)
    ne = len(mesh.edges)
    if G.shape[1] == 0:
        return HarmonicBasis(condition, G, np.zeros((0, len(mesh.faces), 3)), 0, 0.0, 0.0, 0.0)
    W = sp.diags(mesh.cotan_weights())
    K = (d0.T @ W @ d0).tocsr()
    rhs = d0.T @ (W @ G)
    if condition == "T":
        free = np.arange(1, mesh.n_vertices)  # pin one vertex: Neumann problem
        test = np.arange(mesh.n_vertices)
    else:
        free = mesh.interior_vertices
        test = free
    f = np.zeros((mesh.n_vertices, G.shape[1]))
    if len(free):
        f[free] = spsolve(K[free][:, free].tocsc(), rhs[free]).reshape(len(free), -1)
    omega = G - d0 @ f
    # residuals
    scale = np.max(np.abs(omega)) or 1.0
    closed = float(np.max(np.abs(d1 @ omega)) / scale)
    cocl = float(np.max(np.abs((d0.T @ (W @ omega))[test])) / scale)
    if condition == "N":
        bres = float(np.max(np.abs(omega[mesh.boundary_edge_mask])) / scale)
    else:
        bres = cocl
    vecs = np.stack([_face_vectors(mesh, omega[:, k], sign) for k in range(omega.shape[1])])
    if vecs.shape[0] != rep.dim_H1_rel or ne != omega.shape[0]:
        raise NumericalError("harmonic basis has the wrong dimension", module="topology")
    return HarmonicBasis(condition, omega, vecs, omega.shape[1], closed, cocl, bres)


# ---------------------------------------------------------------------------
# test functions from harmonic fields (flat ambient)
# ---------------------------------------------------------------------------

def _require_flat(surface):
    if surface.ball.kappa != 0:
        raise NotApplicableError("curved ambients need an isometric embedding that is not implemented",
                                 module="topology")


def _boundary_rhs(surface, assembly, xi, vdata):
    """-int_dM (1/sin theta) H^dB |xi|^2 ds by the trapezoid rule on boundary edges."""
    be = assembly.mesh.boundary_edges
    V = assembly.mesh.vertices
    L = np.linalg.norm(V[be[:, 1]] - V[be[:, 0]], axis=1)
    dens = np.sum(xi ** 2, axis=1) / np.sin(np.where(np.isnan(vdata.theta), np.pi / 2, vdata.theta))
    HB = surface.ball.boundary_mean_curvature
    return -HB * float(np.sum(0.5 * L * (dens[be[:, 0]] + dens[be[:, 1]])))


def savo_quantities(surface, xi, assembly, vdata=None):
    """Sum over i < j of Q(u_ij, u_ij) with u_ij = xi_i nu_j - xi_j nu_i, and the flat right side.

    Parameters
    ----------
    xi : (n_vertices, 3) array
        Tangent vector field at the vertices (an N-type harmonic field).
    """
    from .discretize import evaluate_Q
    from .surface import vertex_data

    _require_flat(surface)
    vd = vdata if vdata is not None else vertex_data(surface)
    nu = vd.normal
    per = {}
    for i in range(3):
        for j in range(i + 1, 3):
            u = xi[:, i] * nu[:, j] - xi[:, j] * nu[:, i]
            per[f"u{i + 1}{j + 1}"] = evaluate_Q(assembly, u, u)
    lhs = float(sum(per.values()))
    rhs = _boundary_rhs(surface, assembly, xi, vd)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs else float("nan"), "per_function": per}


def ros_quantities(surface, xi, assembly, vdata=None):
    """Sum over i of Q(u_i, u_i) with u_i = xi_i, and the flat right side (T-type field)."""
    from .discretize import evaluate_Q
    from .surface import vertex_data

    _require_flat(surface)
    vd = vdata if vdata is not None else vertex_data(surface)
    per = {f"u{i + 1}": evaluate_Q(assembly, xi[:, i], xi[:, i]) for i in range(3)}
    lhs = float(sum(per.values()))
    rhs = _boundary_rhs(surface, assembly, xi, vd)
    return {"lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs else float("nan"), "per_function": per}
