import math

import numpy as np
import pytest

from bandlimit import Mesh, PreconditionError, ResolutionError, Sphere, Torus, build_basis, weyl_defect
from bandlimit.spectrum import load_basis, sigma, weyl_main_term

TWO_PI = 2 * math.pi


def lattice_count(L, a, b, reach=60):
    """Brute-force count of integer pairs with (2 pi n/a)^2 + (2 pi m/b)^2 <= L."""
    n = np.arange(-reach, reach + 1)
    lam = (TWO_PI * n[:, None] / a) ** 2 + (TWO_PI * n[None, :] / b) ** 2
    return int(np.sum(lam <= L))


def test_sphere_L6_has_nine_modes():
    b = build_basis(Sphere.for_bandwidth(6), 6)
    assert b.k == 9
    np.testing.assert_array_equal(b.eigenvalues, [0, 2, 2, 2, 6, 6, 6, 6, 6])


def test_torus_L1_has_five_modes():
    assert build_basis(Torus.for_bandwidth(TWO_PI, TWO_PI, 1), 1).k == 5


@pytest.mark.parametrize("L", [3.0, 50.0, 123.4, 400.0])
@pytest.mark.parametrize("sides", [(TWO_PI, TWO_PI), (5.0, 3.0)])
def test_torus_counts_match_lattice(L, sides):
    b = build_basis(Torus.for_bandwidth(*sides, L), L)
    assert b.k == lattice_count(L, *sides)


def test_only_constant_below_first_eigenvalue(ico3):
    for M in (Sphere(4), Torus(TWO_PI, TWO_PI, 8), ico3):
        b = build_basis(M, 0.5)
        assert b.k == 1
        np.testing.assert_allclose(np.abs(b.values[0]), 1 / math.sqrt(M.volume), rtol=1e-10)


def test_nonpositive_bandwidth_rejected():
    with pytest.raises(PreconditionError):
        build_basis(Sphere(4), 0.0)


def test_resolution_errors_name_the_limit():
    with pytest.raises(ResolutionError, match="maximum admissible L"):
        build_basis(Sphere(5), 100)
    with pytest.raises(ResolutionError, match="maximum admissible L"):
        build_basis(Torus(TWO_PI, TWO_PI, 8), 100)


def test_gram_orthonormality(sphere_basis, torus_basis, mesh_basis):
    for b, tol in ((sphere_basis, 1e-10), (torus_basis, 1e-10), (mesh_basis, 1e-6)):
        assert np.abs(b.gram() - np.eye(b.k)).max() < tol


def test_cutoff_is_inclusive(sphere_basis, torus_basis):
    for b in (sphere_basis, torus_basis):
        again = build_basis(b.manifold, float(b.eigenvalues[-1]))
        assert again.k == b.k
        assert np.all(np.diff(b.eigenvalues) >= 0)


def test_mesh_cluster_not_split(mesh_basis):
    lam = mesh_basis.eigenvalues
    rebuilt = build_basis(mesh_basis.manifold, float(lam[-1]))
    assert rebuilt.k == mesh_basis.k


def test_sigma_and_main_term():
    assert sigma(2) == pytest.approx(math.pi)
    assert sigma(3) == pytest.approx(4 * math.pi / 3)
    assert weyl_main_term(4 * math.pi, 2, 123.0) == pytest.approx(123.0)


def test_weyl_exact_at_square_degree_counts():
    b = build_basis(Sphere(100, 199), 10_000)
    assert b.k == 10_000
    assert weyl_defect(b) == 0.0


def test_torus_weyl_defect_from_lattice():
    L = 400.0
    b = build_basis(Torus.for_bandwidth(TWO_PI, TWO_PI, L), L)
    assert weyl_defect(b) == pytest.approx(lattice_count(L, TWO_PI, TWO_PI) / (math.pi * L) - 1, abs=1e-14)


def test_cache_roundtrip_is_bit_identical(tmp_path, ico3):
    for M, L in ((Sphere.for_bandwidth(30, 2), 30), (Torus.for_bandwidth(5.0, 4.0, 30), 30), (ico3, 20)):
        b1 = build_basis(M, L, cache_dir=tmp_path)
        b2 = build_basis(M, L, cache_dir=tmp_path)
        np.testing.assert_array_equal(b1.values, b2.values)
        np.testing.assert_array_equal(b1.eigenvalues, b2.eigenvalues)
        np.testing.assert_array_equal(b1.evaluate(M.sample_points(3, 0)), b2.evaluate(M.sample_points(3, 0)))


def test_cache_rejects_other_manifold(tmp_path):
    b = build_basis(Sphere(8), 6, cache_dir=tmp_path)
    path = next(tmp_path.iterdir())
    with pytest.raises(Exception, match="different manifold"):
        load_basis(path, Sphere(9))
    assert b.k == 9


def test_truncate(sphere_basis):
    t = sphere_basis.truncate(6)
    assert t.k == 9
    np.testing.assert_array_equal(t.values, sphere_basis.values[:9])


def test_mesh_gradients_are_tangent_on_faces(mesh_basis):
    M = mesh_basis.manifold
    G = mesh_basis.face_gradients
    v = M.vertices[M.faces]
    normal = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    assert np.abs(np.einsum("ifc,fc->if", G, normal)).max() < 1e-10


def test_torus_gradient_finite_difference(torus_basis):
    p = np.array([[1.0, 2.0]])
    h = 1e-6
    G = torus_basis.evaluate_gradient(p)[:, 0]
    dx = (torus_basis.evaluate(p + [h, 0]) - torus_basis.evaluate(p - [h, 0]))[:, 0] / (2 * h)
    dy = (torus_basis.evaluate(p + [0, h]) - torus_basis.evaluate(p - [0, h]))[:, 0] / (2 * h)
    np.testing.assert_allclose(G[:, 0], dx, atol=1e-6)
    np.testing.assert_allclose(G[:, 1], dy, atol=1e-6)
