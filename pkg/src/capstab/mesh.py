"""Triangle meshes: connectivity, boundary loops, generators and file IO."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ArgumentError, MeshQualityError, TopologyError


class TriMesh:
    """Oriented triangle mesh with boundary.

    Parameters
    ----------
    vertices : (n, 3) array
        Positions in model coordinates.
    faces : (m, 3) int array
        Consistently oriented triangles.
    params : (n, 2) array, optional
        Parameter-domain coordinates when the mesh samples an analytic patch.
    """

    def __init__(self, vertices, faces, params=None):
        v = np.array(vertices, dtype=float, order="C")
        f = np.array(faces, dtype=np.int64, order="C")
        if v.ndim != 2 or v.shape[1] != 3:
            raise ArgumentError("vertices must be an (n, 3) array", module="surface")
        if f.ndim != 2 or f.shape[1] != 3 or f.size == 0:
            raise ArgumentError("faces must be a nonempty (m, 3) array", module="surface")
        if f.min() < 0 or f.max() >= len(v):
            raise ArgumentError("face index out of range", module="surface")
        self.vertices = v
        self.faces = f
        self.params = None if params is None else np.asarray(params, dtype=float)
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        self._build_connectivity()

    # -- connectivity ------------------------------------------------------
    def _build_connectivity(self):
        f = self.faces
        nf = len(f)
        directed = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        und = np.sort(directed, axis=1)
        edges, inverse, counts = np.unique(und, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        if np.any(counts > 2):
            raise TopologyError("non-manifold edge (shared by more than two faces)")
        # each directed edge at most once, otherwise orientation is inconsistent
        d_unique = np.unique(directed, axis=0)
        if len(d_unique) != len(directed):
            raise TopologyError("inconsistently oriented faces")
        self.edges = edges
        self.face_edges = inverse.reshape(3, nf).T
        self.edge_face_count = counts
        bmask = counts == 1
        self.boundary_edge_mask = bmask
        bdir = directed[bmask[inverse]]
        self._boundary_directed = bdir
        nv = len(self.vertices)
        used = np.zeros(nv, dtype=bool)
        used[f.ravel()] = True
        if not used.all():
            raise TopologyError("mesh has isolated vertices")
        self.boundary_vertex_mask = np.zeros(nv, dtype=bool)
        self.boundary_vertex_mask[bdir.ravel()] = True
        out_deg = np.bincount(bdir[:, 0], minlength=nv)
        if np.any(out_deg > 1):
            raise TopologyError("non-manifold boundary vertex")
        self.boundary_loops = self._trace_loops(bdir)

    @staticmethod
    def _trace_loops(bdir):
        nxt = dict(zip(bdir[:, 0].tolist(), bdir[:, 1].tolist()))
        loops, seen = [], set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop, v = [], start
            while v not in seen:
                seen.add(v)
                loop.append(v)
                if v not in nxt:
                    raise TopologyError("open boundary chain")
                v = nxt[v]
            if v != start:
                raise TopologyError("boundary loop does not close")
            loops.append(np.array(loop, dtype=np.int64))
        return loops

    # -- counts ------------------------------------------------------------
    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def boundary_edges(self):
        """Boundary edges oriented along the face orientation."""
        return self._boundary_directed

    @property
    def interior_vertices(self):
        return np.flatnonzero(~self.boundary_vertex_mask)

    @property
    def boundary_vertices(self):
        return np.flatnonzero(self.boundary_vertex_mask)

    def euler_characteristic(self):
        return self.n_vertices - len(self.edges) + len(self.faces)

    def n_components(self):
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        e = self.edges
        a = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(self.n_vertices,) * 2)
        return connected_components(a, directed=False)[0]

    # -- geometry ----------------------------------------------------------
    def scale(self):
        lo, hi = self.vertices.min(0), self.vertices.max(0)
        return float(np.linalg.norm(hi - lo))

    def face_vectors(self):
        v = self.vertices[self.faces]
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_vectors(), axis=1)

    def face_normals(self):
        fv = self.face_vectors()
        return fv / np.linalg.norm(fv, axis=1, keepdims=True)

    def check_quality(self):
        """Raise if any triangle is degenerate relative to the mesh scale."""
        a = self.face_areas()
        tol = 1e-14 * self.scale() ** 2
        bad = np.flatnonzero(a < tol)
        if bad.size:
            raise MeshQualityError(f"{bad.size} degenerate triangle(s), first index {bad[0]}")

    def vertex_normals(self):
        fv = self.face_vectors()  # area weighted
        n = np.zeros_like(self.vertices)
        for k in range(3):
            np.add.at(n, self.faces[:, k], fv)
        return n / np.linalg.norm(n, axis=1, keepdims=True)

    def corner_angles(self):
        v = self.vertices[self.faces]
        ang = np.empty(self.faces.shape)
        for k in range(3):
            a = v[:, (k + 1) % 3] - v[:, k]
            b = v[:, (k + 2) % 3] - v[:, k]
            ang[:, k] = np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b))
        return ang

    def cotan_weights(self):
        """Per-edge weights w_ij = (cot a + cot b)/2 matching ``self.edges``."""
        v = self.vertices[self.faces]
        w = np.zeros(len(self.edges))
        for k in range(3):
            # angle at corner k faces the edge opposite it (k+1, k+2)
            a = v[:, (k + 1) % 3] - v[:, k]
            b = v[:, (k + 2) % 3] - v[:, k]
            cot = np.einsum("ij,ij->i", a, b) / np.linalg.norm(np.cross(a, b), axis=1)
            np.add.at(w, self.face_edges[:, (k + 1) % 3], 0.5 * cot)
        return w

    def vertex_rings(self, depth=2):
        """Vertex neighbourhoods of the given combinatorial depth (excluding the vertex)."""
        from scipy.sparse import coo_matrix, identity

        e = self.edges
        n = self.n_vertices
        adj = coo_matrix((np.ones(2 * len(e)), (np.r_[e[:, 0], e[:, 1]], np.r_[e[:, 1], e[:, 0]])),
                         shape=(n, n)).tocsr()
        reach = identity(n, format="csr")
        for _ in range(depth):
            reach = reach + reach @ adj
        reach = reach.tocsr()
        return [np.setdiff1d(reach.indices[reach.indptr[i]:reach.indptr[i + 1]], [i]) for i in range(n)]

    def with_vertices(self, vertices):
        return TriMesh(vertices, self.faces, self.params)


# ---------------------------------------------------------------------------
# parameter-domain generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ParamMesh:
    """Connectivity plus parameter coordinates, before mapping into space."""

    params: np.ndarray
    faces: np.ndarray
    boundary: np.ndarray = field(repr=False)  # boolean mask


def disk_param_mesh(level):
    """Unit disk by concentric rings; ring k carries 6k vertices.

    ``n_r = 8 * 2**level`` rings, so level 3 has 12481 vertices.
    """
    if level < 0:
        raise ArgumentError("mesh level must be nonnegative", module="surface")
    nr = 8 * 2 ** level
    pts = [np.zeros((1, 2))]
    start = [0]
    for k in range(1, nr + 1):
        a = 2 * np.pi * np.arange(6 * k) / (6 * k)
        pts.append(np.c_[np.cos(a), np.sin(a)] * (k / nr))
        start.append(start[-1] + (1 if k == 1 else 6 * (k - 1)))
    params = np.concatenate(pts)
    faces = []
    for k in range(1, nr + 1):
        no = 6 * k
        so = start[k]
        if k == 1:
            for j in range(no):
                faces.append((0, so + j, so + (j + 1) % no))
            continue
        ni, si = 6 * (k - 1), start[k - 1]
        i = j = 0
        while i < ni or j < no:
            # advance whichever ring's next vertex comes first in angle
            ai = (i + 1) / ni
            aj = (j + 1) / no
            if j < no and (i >= ni or aj <= ai):
                faces.append((si + i % ni, so + j, so + (j + 1) % no))
                j += 1
            else:
                faces.append((si + i % ni, so + j % no, si + (i + 1) % ni))
                i += 1
    boundary = np.zeros(len(params), dtype=bool)
    boundary[start[nr]:] = True
    return ParamMesh(params, np.array(faces, dtype=np.int64), boundary)


def annulus_param_mesh(level, t_half, rows=None):
    """Rectangle [-t_half, t_half] x [0, 2pi) with periodic second coordinate."""
    if level < 0:
        raise ArgumentError("mesh level must be nonnegative", module="surface")
    nphi = 24 * 2 ** level
    nt = rows if rows is not None else max(3, int(round(nphi * t_half / np.pi)) + 1)
    t = np.linspace(-t_half, t_half, nt)
    phi = 2 * np.pi * np.arange(nphi) / nphi
    T, P = np.meshgrid(t, phi, indexing="ij")
    params = np.c_[T.ravel(), P.ravel()]
    idx = np.arange(nt * nphi).reshape(nt, nphi)
    faces = []
    for i in range(nt - 1):
        for j in range(nphi):
            a, b = idx[i, j], idx[i, (j + 1) % nphi]
            c, d = idx[i + 1, j], idx[i + 1, (j + 1) % nphi]
            if (i + j) % 2 == 0:
                faces += [(a, d, b), (a, c, d)]
            else:
                faces += [(a, c, b), (b, c, d)]
    boundary = np.zeros(len(params), dtype=bool)
    boundary[idx[0]] = True
    boundary[idx[-1]] = True
    return ParamMesh(params, np.array(faces, dtype=np.int64), boundary)


def holed_torus_mesh(level=0, major=0.6, minor=0.25):
    """Torus of revolution with one square patch of faces removed (g = 1, r = 1)."""
    nu, nv = 16 * 2 ** level, 8 * 2 ** level
    uu = 2 * np.pi * np.arange(nu) / nu
    vv = 2 * np.pi * np.arange(nv) / nv
    U, V = np.meshgrid(uu, vv, indexing="ij")
    x = np.c_[((major + minor * np.cos(V)) * np.cos(U)).ravel(),
              ((major + minor * np.cos(V)) * np.sin(U)).ravel(),
              (minor * np.sin(V)).ravel()]
    idx = np.arange(nu * nv).reshape(nu, nv)
    hole = max(2, nv // 4)
    faces = []
    for i in range(nu):
        for j in range(nv):
            if i < hole and j < hole:
                continue
            a, b = idx[i, j], idx[(i + 1) % nu, j]
            c, d = idx[i, (j + 1) % nv], idx[(i + 1) % nu, (j + 1) % nv]
            faces += [(a, b, d), (a, d, c)]
    faces = np.array(faces, dtype=np.int64)
    used = np.unique(faces)
    remap = -np.ones(len(x), dtype=np.int64)
    remap[used] = np.arange(len(used))
    return TriMesh(x[used], remap[faces])


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------

def _fan(poly):
    return [(poly[0], poly[k], poly[k + 1]) for k in range(1, len(poly) - 1)]


def read_mesh(path):
    """Read an OFF or OBJ file; polygons are fan-triangulated."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in (".off", ".obj"):
        raise ArgumentError(f"unsupported mesh format {suffix!r}", module="surface")
    text = path.read_text().split("\n")
    verts, faces = [], []
    if suffix == ".off":
        lines = [ln.split("#")[0].strip() for ln in text]
        lines = [ln for ln in lines if ln]
        if not lines or not lines[0].upper().startswith("OFF"):
            raise ArgumentError(f"{path}: missing OFF header", module="surface")
        head = lines[0][3:].split() or lines[1].split()
        body = lines[1:] if lines[0][3:].split() else lines[2:]
        nv, nf = int(head[0]), int(head[1])
        for ln in body[:nv]:
            verts.append([float(s) for s in ln.split()[:3]])
        for ln in body[nv:nv + nf]:
            vals = [int(s) for s in ln.split()]
            faces += _fan(vals[1:1 + vals[0]])
    else:
        for ln in text:
            parts = ln.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(s) for s in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(s.split("/")[0]) for s in parts[1:]]
                idx = [i - 1 if i > 0 else len(verts) + i for i in idx]
                faces += _fan(idx)
    return TriMesh(np.array(verts), np.array(faces))


def write_mesh(mesh, path, vertex_scalars=None):
    """Write OFF or OBJ. ``vertex_scalars`` is ignored for OBJ."""
    path = Path(path)
    fmt = "{:.17g}"
    if path.suffix.lower() == ".off":
        out = ["OFF", f"{mesh.n_vertices} {len(mesh.faces)} {len(mesh.edges)}"]
        out += [" ".join(fmt.format(c) for c in v) for v in mesh.vertices]
        out += ["3 " + " ".join(str(i) for i in f) for f in mesh.faces]
    elif path.suffix.lower() == ".obj":
        out = ["v " + " ".join(fmt.format(c) for c in v) for v in mesh.vertices]
        out += ["f " + " ".join(str(i + 1) for i in f) for f in mesh.faces]
    else:
        raise ArgumentError(f"unsupported mesh format {path.suffix!r}", module="surface")
    path.write_text("\n".join(out) + "\n")
