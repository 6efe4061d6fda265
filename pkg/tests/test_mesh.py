import numpy as np
import pytest

from greenlab.coefficients import checkerboard
from greenlab.errors import InvalidParameter
from greenlab.mesh import TriMesh, triangulate
from greenlab.mesh import MIN_ANGLE_DEG


def test_square_exact_cover(square):
    m = triangulate(square, 0.1)
    assert m.area == pytest.approx(1.0, abs=1e-14)
    assert m.h_max <= 0.1 + 1e-12
    assert m.min_angles_deg().min() >= MIN_ANGLE_DEG


def test_disk_exact_cover(disk):
    m = triangulate(disk, 0.05)
    assert abs(m.area - disk.area) <= 1e-12
    # every boundary vertex of the polygon is a mesh vertex
    d = np.linalg.norm(disk.vertices[:, None, :] - m.vertices[None, :, :], axis=2).min(axis=1)
    assert d.max() <= 1e-13


def test_grading_at_pole(disk):
    y = np.zeros(2)
    m = triangulate(disk, 0.1, grading=(y, 8.0))
    tri, _ = m.locate(y[None])
    incident = np.nonzero(np.any(np.linalg.norm(m.tri_xy - y, axis=2) < 1e-14, axis=1))[0]
    assert len(incident) > 0 and tri[0] >= 0
    assert m.diameters[incident].min() <= 0.1 / 8 * (1 + 1e-12)
    assert m.diameters.max() <= 0.1 + 1e-12


def test_pole_on_grid_node(disk):
    # the grading pole coincides with a checkerboard grid vertex
    cf = checkerboard(10.0)
    m = triangulate(disk, 0.1, grading=(np.zeros(2), 8.0), coefficients=cf)
    assert abs(m.area - disk.area) <= 1e-12


def test_grid_conformity(disk):
    cf = checkerboard(10.0, m=2)
    m = triangulate(disk, 0.1, coefficients=cf)
    xs, ys = cf.grid_lines()
    p = m.tri_xy
    for c in xs:
        s = p[:, :, 0] - c
        assert not np.any((s.min(axis=1) < -1e-12) & (s.max(axis=1) > 1e-12))
    for c in ys:
        s = p[:, :, 1] - c
        assert not np.any((s.min(axis=1) < -1e-12) & (s.max(axis=1) > 1e-12))
    # coefficients are constant on every triangle
    M = cf.matrices(p.reshape(-1, 2)).reshape(len(p), 3, 4, 4)
    cen = cf.matrices(m.centroids)
    inner = 0.9 * p + 0.1 * m.centroids[:, None, :]
    Mi = cf.matrices(inner.reshape(-1, 2)).reshape(len(p), 3, 4, 4)
    assert np.array_equal(Mi, np.broadcast_to(cen[:, None], Mi.shape))
    assert M.shape[0] == len(p)


def test_mesh_quadrature(disk):
    m = triangulate(disk, 0.1)
    x, w, _ = m.quadrature(4)
    assert w.sum() == pytest.approx(disk.area, abs=1e-12)
    assert abs(np.sum(w * x[..., 0])) <= 1e-12
    assert np.sum(w * x[..., 0] ** 2) == pytest.approx(np.sum(w * x[..., 1] ** 2), abs=1e-12)


def test_locate(square):
    m = triangulate(square, 0.2)
    pts = np.random.default_rng(0).uniform(0, 1, (200, 2))
    tri, bary = m.locate(pts)
    assert np.all(tri >= 0)
    back = np.einsum("nk,nkd->nd", bary, m.tri_xy[tri])
    assert np.allclose(back, pts, atol=1e-13)
    assert m.locate(np.array([[2.0, 2.0]]))[0][0] == -1


def test_io_roundtrip(tmp_path, square):
    m = triangulate(square, 0.2)
    m.to_json(tmp_path / "m.json")
    m.to_binary(tmp_path / "m.bin")
    for back in (TriMesh.from_json(tmp_path / "m.json"), TriMesh.from_binary(tmp_path / "m.bin")):
        assert np.array_equal(back.vertices, m.vertices)
        assert np.array_equal(back.triangles, m.triangles)
    (tmp_path / "bad.bin").write_bytes(b"nope" * 8)
    with pytest.raises(ValueError):
        TriMesh.from_binary(tmp_path / "bad.bin")


def test_p2_numbering(square):
    m = triangulate(square, 0.3)
    assert len(m.p2_nodes) == m.n_vertices + m.n_edges
    t = m.p2_triangles
    mid = m.p2_nodes[t[:, 3]]
    assert np.allclose(mid, 0.5 * (m.vertices[t[:, 1]] + m.vertices[t[:, 2]]))


def test_invalid_arguments(square, fdisk):
    with pytest.raises(InvalidParameter):
        triangulate(square, -0.1)
    with pytest.raises(InvalidParameter):
        triangulate(square, 0.1, grading=(np.array([0.5, 0.5]), 20.0))
    with pytest.raises(InvalidParameter):
        triangulate(fdisk, fdisk.R0)
