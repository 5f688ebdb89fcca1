import math

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from bandlimit import Sphere, build_basis
from bandlimit import logvinenko as lv
from bandlimit.bandlimited import find_tail_radius, concentrated_function
from bandlimit.errors import ResolutionError, UsageError
from oracles import rayleigh_min

NORTH = np.array([[0.0, 0.0, 1.0]])
SOUTH = np.array([[0.0, 0.0, -1.0]])


@pytest.fixture(scope="module")
def basis400():
    return build_basis(Sphere.for_bandwidth(400, 4), 400)


def test_whole_and_empty(sphere_basis):
    assert lv.ls_constant(lv.Whole(), sphere_basis) == pytest.approx(1.0, abs=1e-12)
    assert lv.ls_constant(lv.Empty(), sphere_basis) == 0.0
    assert lv.relative_density(lv.Whole(), sphere_basis, 1.0) == 1.0
    assert lv.relative_density(lv.Empty(), sphere_basis, 1.0) == 0.0


def test_hemisphere_density_vanishes(basis400):
    assert lv.relative_density(lv.Hemisphere(), basis400, 4.0) == 0.0


def test_complement_of_small_cap_density(basis400):
    rho = 4.0 / math.sqrt(400)
    region = lv.Complement(lv.Cap(basis400.manifold.sample_points(1, 3), rho / 2))
    # the worst ball is centered on the removed cap: 1 - (1/2)^2 of its area survives
    assert lv.relative_density(region, basis400, 4.0) == pytest.approx(1 - 2.0 ** -2, abs=0.06)


def test_density_below_resolution(sphere_basis):
    with pytest.raises(ResolutionError):
        lv.relative_density(lv.Whole(), sphere_basis, 0.1)


@pytest.mark.parametrize("which", ["small_sphere_basis", "small_torus_basis"])
def test_bruteforce_oracle(which, request, rng):
    b = request.getfixturevalue(which)
    M = b.manifold
    for center_seed in range(3):
        region = lv.Cap(M.sample_points(1, center_seed), 1.2)
        mask = lv.node_mask(region, M)
        ref, best_random = rayleigh_min(b.values[:, mask], M.weights[mask], rng, tuples=20_000)
        exact = lv.ls_constant(region, b)
        assert best_random >= exact - 1e-12
        assert exact == pytest.approx(ref, abs=1e-6)


def test_complement_identity(sphere_basis, mesh_basis):
    for b, tol in ((sphere_basis, 1e-12), (mesh_basis, 1e-8)):
        mask = lv.node_mask(lv.Cap(b.manifold.sample_points(1, 1), 0.7), b.manifold)
        G = lv.set_gram(mask, b) + lv.set_gram(~mask, b)
        assert np.abs(G - np.eye(b.k)).max() <= tol
        assert lv.complement_ls_constant(mask, b) == pytest.approx(lv.ls_constant(mask, b), abs=10 * tol)


def test_containment_monotone(sphere_basis):
    M = sphere_basis.manifold
    c = M.sample_points(1, 0)
    small, large = lv.Cap(c, 1.0), lv.Union((lv.Cap(c, 1.0), lv.Band(0.3)))
    assert lv.ls_constant(small, sphere_basis) <= lv.ls_constant(large, sphere_basis)
    assert lv.relative_density(small, sphere_basis, 2.0) <= lv.relative_density(large, sphere_basis, 2.0)


def test_rotation_invariance(sphere_basis):
    R = Rotation.from_euler("zyx", [0.3, 1.1, -0.4]).as_matrix()
    rotated = build_basis(Sphere(sphere_basis.manifold.n_theta, sphere_basis.manifold.n_phi, rotation=R), 100)
    c = sphere_basis.manifold.sample_points(1, 2)
    a = lv.ls_constant(lv.Cap(c, 1.3), sphere_basis)
    b = lv.ls_constant(lv.Cap(c @ R.T, 1.3), rotated)
    assert a == pytest.approx(b, abs=1e-8)
    da = lv.relative_density(lv.Cap(c, 1.3), sphere_basis, 4.0)
    db = lv.relative_density(lv.Cap(c @ R.T, 1.3), rotated, 4.0)
    assert da == pytest.approx(db, abs=1e-8)


def test_hemisphere_parity(sphere_basis):
    north, south = lv.Hemisphere((0, 0, 1)), lv.Hemisphere((0, 0, -1))
    assert lv.ls_constant(north, sphere_basis) == pytest.approx(lv.ls_constant(south, sphere_basis), abs=1e-12)
    assert lv.relative_density(north, sphere_basis, 2.0) == lv.relative_density(south, sphere_basis, 2.0)


def test_minus_one_cap_stays_ls():
    for L in (100, 400):
        b = build_basis(Sphere.for_bandwidth(L, 4), L)
        region = lv.Complement(lv.Cap(b.manifold.sample_points(1, 0), 1 / math.sqrt(L)))
        assert lv.ls_constant(region, b) > 0.5
        assert lv.relative_density(region, b, 4.0) > 0.5


def test_concentration_witness(basis400):
    M = basis400.manifold
    xi = M.sample_points(1, 6)
    f = concentrated_function(basis400, xi, 2)
    R0, _ = find_tail_radius([(f, xi)], 0.05)
    ball = lv.Cap(xi, R0 / math.sqrt(400))
    whole = lv.concentration_witness(lv.Whole(), basis400, xi, 2, 0.05, R0)
    assert whole.integral == pytest.approx(1.0, abs=1e-10) and np.isfinite(whole.value)
    outside = lv.concentration_witness(lv.Complement(ball), basis400, xi, 2, 0.05, R0)
    assert outside.tail_only and outside.ok and outside.integral < 0.05 and outside.value is None
    inside = lv.concentration_witness(ball, basis400, xi, 2, 0.05, R0)
    assert inside.integral >= 1 - 0.05


def test_ls_sweep_summary():
    bases = {L: build_basis(Sphere.for_bandwidth(L, 4), L) for L in (30, 100)}

    def family(basis):
        yield "whole", lv.Whole()
        yield "north", lv.Hemisphere()
        yield "cap", lv.Cap(NORTH, 2.0)
    res = lv.ls_equivalence_sweep(family, bases, 4.0)
    assert [r["set_id"] for r in res.rows] == ["cap", "cap", "north", "north", "whole", "whole"]
    assert res.summary["ls_min_by_set"]["whole"] == pytest.approx(1.0)
    with pytest.raises(UsageError):
        lv.ls_equivalence_sweep(family, {30: bases[30]}, 4.0)


def test_region_json(sphere_basis):
    M = sphere_basis.manifold
    doc = {"kind": "union", "members": [
        {"kind": "cap", "center": [0, 0, 1], "radius": 5.0, "scale": "sqrt_L"},
        {"kind": "complement", "of": {"kind": "band", "half_width": 1.2}},
        {"kind": "nodes", "ids": [0, 1, 2]},
    ]}
    region = lv.region_from_json(doc, M, 100)
    expected = (lv.node_mask(lv.Cap(NORTH, 0.5), M) | ~lv.node_mask(lv.Band(1.2), M))
    expected[:3] = True
    np.testing.assert_array_equal(lv.node_mask(region, M), expected)
    with pytest.raises(UsageError):
        lv.region_from_json({"kind": "blob"}, M, 100)


def test_band_matches_latitude(sphere_basis):
    M = sphere_basis.manifold
    mask = lv.node_mask(lv.Band(0.5), M)
    theta = np.arccos(M.nodes[:, 2])
    np.testing.assert_array_equal(mask, np.abs(theta - math.pi / 2) < 0.5)


def test_torus_band(torus_basis):
    M = torus_basis.manifold
    mask = lv.node_mask(lv.Band(0.5, offset=0.0), M)
    y = M.nodes[:, 1]
    np.testing.assert_array_equal(mask, (y < 0.5) | (y > M.side_y - 0.5))
