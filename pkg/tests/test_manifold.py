import math

import numpy as np
import pytest

from bandlimit import Mesh, ResolutionError, Sphere, Torus, UsageError
from bandlimit.manifold import concat_points, point_from_json, take_points

NORTH = np.array([[0.0, 0.0, 1.0]])
SOUTH = np.array([[0.0, 0.0, -1.0]])


@pytest.fixture(scope="module")
def sphere():
    return Sphere.for_bandwidth(400, 4)


@pytest.fixture(scope="module")
def torus():
    return Torus.for_bandwidth(2 * math.pi, 2 * math.pi, 400, 4)


def test_sphere_quadrature_totals(sphere):
    assert np.all(sphere.weights > 0)
    assert sphere.weights.sum() == pytest.approx(4 * math.pi, rel=1e-12)
    assert sphere.injectivity_radius == math.pi


def test_torus_quadrature_totals(torus):
    assert torus.weights.sum() == pytest.approx(4 * math.pi ** 2, rel=1e-12)
    assert torus.injectivity_radius == pytest.approx(math.pi)


def test_antipodal_distance(sphere):
    assert sphere.distance(NORTH, SOUTH) == pytest.approx(math.pi, abs=1e-15)


def test_torus_wraparound(torus):
    d = torus.distance(np.array([[0.0, 0.0]]), np.array([[math.pi + 0.5, 0.0]]))
    assert d == pytest.approx(math.pi - 0.5, abs=1e-14)


def test_distance_symmetry(sphere, torus, rng):
    for M in (sphere, torus):
        a, b = M.sample_points(1, 1), M.sample_points(1, 2)
        assert M.distance(a, b) == M.distance(b, a)


def test_ball_whole_sphere(sphere):
    b = sphere.ball(NORTH, math.pi + 1)
    assert len(b.indices) == len(sphere)


def test_ball_mass_close_to_cap(sphere):
    # generic center: at a pole the cap rim can fall between two latitude rings
    mass = sphere.ball(sphere.sample_points(1, 0), 0.3).mass
    assert mass == pytest.approx(2 * math.pi * (1 - math.cos(0.3)), rel=0.05)


def test_ball_mass_close_to_disc(torus):
    mass = torus.ball(np.array([[1.0, 2.0]]), 0.5).mass
    assert mass == pytest.approx(math.pi * 0.25, rel=0.05)


def test_closed_form_volumes(sphere, torus):
    assert sphere.ball_volume(NORTH, math.pi) == pytest.approx(4 * math.pi, abs=1e-10)
    assert torus.ball_volume(np.array([[0.0, 0.0]]), 1.0) == pytest.approx(math.pi, rel=1e-14)
    # beyond the inscribed disc the wrapped area never exceeds the torus
    assert torus.ball_volume(np.array([[0.0, 0.0]]), 10.0) == pytest.approx(4 * math.pi ** 2, rel=1e-8)


def test_ball_monotone(sphere):
    small = set(sphere.ball(NORTH, 0.2).indices)
    large = set(sphere.ball(NORTH, 0.4).indices)
    assert small <= large


def test_node_ball_volume_below_resolution():
    with pytest.raises(ResolutionError, match="minimum resolvable radius"):
        Sphere(8).node_ball_volume(np.array([[1.0, 0.0, 0.0]]), 1e-6)


def test_ahlfors_regularity(sphere):
    for r in np.linspace(0.01 * math.pi, math.pi, 20):
        ratio = sphere.ball_volume(NORTH, r) / r ** 2
        assert 4.0 / math.pi <= ratio <= math.pi + 1e-12


def test_sample_points_cap_fraction(sphere):
    pts = sphere.sample_points(10_000, 7)
    frac = np.mean(sphere.distances(NORTH[0], pts) < 1.0)
    assert frac == pytest.approx((1 - math.cos(1.0)) / 2, rel=0.05)


def test_sample_points_deterministic(sphere, torus):
    for M in (sphere, torus):
        np.testing.assert_array_equal(M.sample_points(5, 3), M.sample_points(5, 3))


def test_sphere_rejects_non_unit():
    with pytest.raises(UsageError):
        Sphere(8).as_points(np.array([[1.0, 1.0, 0.0]]))


def test_close_pairs_matches_bruteforce(sphere, torus):
    for M in (sphere, torus):
        pts = M.sample_points(150, 11)
        fast = M.close_pairs(pts, 0.2)
        slow = [(i, j) for i in range(150) for j in range(i + 1, 150)
                if M.distance(take_points(pts, [i]), take_points(pts, [j])) < 0.2]
        assert [tuple(p) for p in fast] == slow


def test_ball_sums_match_distances(sphere):
    centers = sphere.sample_points(20, 1)
    pts = sphere.sample_points(500, 2)
    vals = np.arange(500.0)
    sums = sphere.ball_sums(centers, pts, vals, 0.3)
    for c, s in zip(centers, sums):
        assert s == vals[sphere.distances(c, pts) < 0.3].sum()


@pytest.mark.parametrize("backend", ["sphere", "torus"])
def test_ball_quadrature_integrates_products(backend):
    # integral of phi^2 over a ball by the adapted rule vs a dense node split
    from bandlimit import build_basis

    M = Sphere.for_bandwidth(100, 2) if backend == "sphere" else Torus.for_bandwidth(6.0, 5.0, 100, 2)
    fine = Sphere.for_bandwidth(100, 40) if backend == "sphere" else Torus.for_bandwidth(6.0, 5.0, 100, 40)
    basis = build_basis(M, 100)
    c = M.sample_points(1, 4)
    pts, w = M.ball_quadrature(c, 0.4, 100)
    exact = w @ basis.evaluate(pts)[7] ** 2
    ball = fine.ball(c, 0.4)
    approx = fine.weights[ball.indices] @ basis.evaluate(fine.nodes[ball.indices])[7] ** 2
    assert exact == pytest.approx(approx, rel=2e-2)


def test_concat_and_json_points(sphere, ico3):
    a = point_from_json(sphere, [0, 0, 2])
    np.testing.assert_allclose(a, NORTH)
    both = concat_points(sphere, a, SOUTH)
    assert both.shape == (2, 3)
    v = point_from_json(ico3, 5)
    np.testing.assert_allclose(v.positions[0], ico3.vertices[5])
    with pytest.raises(UsageError):
        point_from_json(ico3, 10 ** 6)
