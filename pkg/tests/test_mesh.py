import numpy as np
import pytest
import scipy.sparse as sp

from capstab.errors import ArgumentError, MeshQualityError, TopologyError
from capstab.mesh import TriMesh, annulus_param_mesh, disk_param_mesh, holed_torus_mesh, read_mesh, write_mesh


def _disk(level):
    pm = disk_param_mesh(level)
    return TriMesh(np.c_[pm.params, np.zeros(len(pm.params))], pm.faces, pm.params)


@pytest.mark.parametrize("level,nv", [(0, 217), (1, 817), (2, 3169), (3, 12481)])
def test_disk_vertex_counts(level, nv):
    pm = disk_param_mesh(level)
    # 1 + 3 n (n + 1) vertices with n = 8 * 2**level rings
    assert len(pm.params) == nv
    assert pm.boundary.sum() == 6 * 8 * 2 ** level


@pytest.mark.parametrize("level", [0, 1, 2])
def test_disk_topology(level):
    m = _disk(level)
    assert m.euler_characteristic() == 1
    assert len(m.boundary_loops) == 1
    assert np.array_equal(np.sort(m.boundary_vertices), np.flatnonzero(disk_param_mesh(level).boundary))
    assert m.face_areas().sum() == pytest.approx(np.pi, rel=5e-3 / 4 ** level)


def test_annulus_topology():
    pm = annulus_param_mesh(1, 1.2)
    nphi = 48
    assert len(pm.params) % nphi == 0
    m = TriMesh(np.c_[np.cos(pm.params[:, 1]), np.sin(pm.params[:, 1]), pm.params[:, 0]], pm.faces, pm.params)
    assert m.euler_characteristic() == 0
    assert len(m.boundary_loops) == 2
    assert pm.boundary.sum() == 2 * nphi


def test_holed_torus():
    m = holed_torus_mesh()
    assert m.euler_characteristic() == -1
    assert len(m.boundary_loops) == 1
    assert m.n_components() == 1


def test_cotan_laplacian_kills_constants():
    m = _disk(1)
    w = m.cotan_weights()
    n = m.n_vertices
    e = m.edges
    K = sp.coo_matrix((np.r_[w, w, -w, -w], (np.r_[e[:, 0], e[:, 1], e[:, 0], e[:, 1]],
                                             np.r_[e[:, 1], e[:, 0], e[:, 0], e[:, 1]])), shape=(n, n)).tocsr()
    assert np.max(np.abs(K @ np.ones(n))) <= 1e-12
    # flat disk: x is harmonic, so K x vanishes at interior vertices
    x = m.vertices[:, 0]
    assert np.max(np.abs((K @ x)[m.interior_vertices])) <= 1e-12


@pytest.mark.parametrize("suffix", [".off", ".obj"])
def test_io_roundtrip(tmp_path, suffix):
    m = holed_torus_mesh()
    p = tmp_path / f"m{suffix}"
    write_mesh(m, p)
    r = read_mesh(p)
    assert np.array_equal(r.faces, m.faces)
    assert np.array_equal(r.vertices, m.vertices)


def test_off_quads_are_fanned(tmp_path):
    p = tmp_path / "q.off"
    p.write_text("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
    m = read_mesh(p)
    assert len(m.faces) == 2
    assert m.euler_characteristic() == 1


def test_errors(tmp_path):
    V = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [0, 0, 1], [1, 1, 1]], float)
    with pytest.raises(TopologyError):
        # edge (0, 1) shared by three faces
        TriMesh(V, [[0, 1, 2], [1, 0, 3], [0, 1, 4]])
    with pytest.raises(TopologyError):
        TriMesh(V[:4], [[0, 1, 2], [0, 1, 3]])  # inconsistent orientation
    with pytest.raises(ArgumentError):
        TriMesh(V, [[0, 1, 7]])
    with pytest.raises(ArgumentError):
        TriMesh(V[:, :2], [[0, 1, 2]])
    flat = TriMesh(np.array([[0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 1, 0]], float), [[0, 1, 2], [0, 3, 1]])
    with pytest.raises(MeshQualityError):
        flat.check_quality()
    p = tmp_path / "bad.off"
    p.write_text("3 1 0\n")
    with pytest.raises(ArgumentError):
        read_mesh(p)
    with pytest.raises(ArgumentError):
        read_mesh(tmp_path / "x.stl")
    with pytest.raises(ArgumentError):
        disk_param_mesh(-1)
