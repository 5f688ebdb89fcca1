import math

import numpy as np
import pytest

from bandlimit import Mesh, build_basis
from bandlimit.errors import DegenerateMeshError, MeshNotClosedError, UsageError
from bandlimit.mesh import (
    cotangent_laplacian,
    flat_torus_mesh,
    icosphere,
    read_off,
    write_off,
)
from bandlimit.spectrum import mesh_laplacian


@pytest.fixture(scope="module")
def ico4():
    return Mesh.icosphere(4)


def great_circle(p, q):
    p = p / np.linalg.norm(p)
    q = q / np.linalg.norm(q)
    return math.atan2(np.linalg.norm(np.cross(p, q)), p @ q)


def test_icosphere_counts():
    v, f = icosphere(4)
    assert len(v) == 2562 and len(f) == 5120
    np.testing.assert_allclose(np.linalg.norm(v, axis=1), 1.0)


def test_off_roundtrip(tmp_path):
    v, f = icosphere(1)
    path = tmp_path / "ico.off"
    write_off(path, v, f)
    v2, f2 = read_off(path)
    np.testing.assert_array_equal(v, v2)
    np.testing.assert_array_equal(f, f2)


def test_off_polygon_faces_are_fanned(tmp_path):
    path = tmp_path / "quad.off"
    path.write_text("OFF\n# a comment\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n")
    _, f = read_off(path)
    np.testing.assert_array_equal(f, [[0, 1, 2], [0, 2, 3]])


def test_not_off(tmp_path):
    path = tmp_path / "x.off"
    path.write_text("PLY\n")
    with pytest.raises(UsageError):
        read_off(path)


def test_open_mesh_rejected():
    v, f = icosphere(1)
    with pytest.raises(MeshNotClosedError):
        cotangent_laplacian(v, f[1:])


def test_degenerate_triangle_rejected():
    v, f = icosphere(1)
    v = v.copy()
    a, b, c = f[0]
    v[c] = v[a]  # collapse one triangle onto an edge
    with pytest.raises(DegenerateMeshError):
        cotangent_laplacian(v, f)


def test_flat_torus_constants_in_kernel():
    K, mass = cotangent_laplacian(*flat_torus_mesh(2 * math.pi, 2 * math.pi, 16))
    assert np.abs(K @ np.ones(K.shape[0])).max() < 1e-12
    assert mass.sum() == pytest.approx(triangle_total(*flat_torus_mesh(2 * math.pi, 2 * math.pi, 16)), rel=1e-12)


def triangle_total(v, f):
    from bandlimit.mesh import triangle_areas

    return triangle_areas(v, f).sum()


def test_stiffness_symmetric_psd(ico3):
    K, mass = mesh_laplacian(ico3)
    assert abs(K - K.T).max() < 1e-14
    ev = np.linalg.eigvalsh(K.toarray())
    assert ev[0] > -1e-10 and ev[1] > 1e-3  # one-dimensional kernel
    assert mass.sum() == pytest.approx(ico3.volume, rel=1e-12)


def test_geodesics_within_two_percent(ico4, rng):
    verts = ico4.vertices
    pairs = rng.integers(0, len(verts), size=(30, 2))
    for i, j in pairs:
        if i == j:
            continue
        d = ico4.distance(ico4.vertex(i), ico4.vertex(j))
        assert d == pytest.approx(great_circle(verts[i], verts[j]), rel=0.02)


def test_geodesic_symmetry(ico3):
    a, b = ico3.sample_points(2, 5)
    d1 = ico3.distance(a, b)
    d2 = ico3.distance(b, a)
    assert d1 == pytest.approx(d2, abs=1e-9)
    assert ico3.distance(a, a) == 0.0


def test_points_from_other_mesh_rejected(ico3):
    other = Mesh.icosphere(1)
    with pytest.raises(UsageError):
        ico3.distance(other.vertex(0), ico3.vertex(0))


def test_sample_points_barycentric(ico3):
    p = ico3.sample_points(100, 1)
    assert np.all(p.bary >= 0)
    np.testing.assert_allclose(p.bary.sum(axis=1), 1.0, atol=1e-12)


def test_refinement_improves_spectrum(ico3, ico4):
    exact = np.repeat([2.0, 6.0, 12.0], [3, 5, 7])
    errs = []
    for M in (ico3, ico4):
        lam = build_basis(M, 13).eigenvalues[1:16]
        errs.append(np.max(np.abs(lam / exact - 1)))
    assert errs[1] < errs[0]


def test_ball_on_mesh_matches_node_distances(ico3):
    c = ico3.vertex(17)
    ball = ico3.ball(c, 0.4)
    d = ico3.node_distances(c)
    np.testing.assert_array_equal(ball.indices, np.flatnonzero(d < 0.4))
