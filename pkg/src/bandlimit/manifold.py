"""Compact surfaces with geodesic distance and node quadrature.

Points are plain float arrays: unit 3-vectors on the sphere, (x, y) pairs in
[0, a) x [0, b) on the torus.  Mesh points live in :mod:`bandlimit.mesh`.
"""

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree

from . import sphharm
from .errors import ResolutionError, UsageError


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray
    exactness_degree: int | None = None

    def __len__(self):
        return len(self.weights)


@dataclass(frozen=True)
class Ball:
    manifold: "Manifold" = field(repr=False)
    center: np.ndarray
    radius: float
    indices: np.ndarray

    @property
    def mass(self):
        return float(self.manifold.quadrature.weights[self.indices].sum())

    def contains(self, points):
        return self.manifold.distances(self.center, points) < self.radius


class Manifold:
    """Shared behaviour. Subclasses set the geometry and the quadrature."""

    backend = None
    dimension = 2

    volume: float
    injectivity_radius: float
    diameter: float
    quadrature: Quadrature

    @property
    def nodes(self):
        return self.quadrature.nodes

    @property
    def weights(self):
        return self.quadrature.weights

    def __len__(self):
        return len(self.quadrature)

    def as_points(self, points):
        raise NotImplementedError

    def distances(self, a, points):
        """Geodesic distance from the single point ``a`` to each of ``points``."""
        raise NotImplementedError

    def distance(self, a, b):
        a = self.as_points(a)
        b = self.as_points(b)
        if len(a) != 1 or len(b) != 1:
            raise UsageError("distance expects single points; use distances()")
        return float(self.distances(a[0], b)[0])

    def node_distances(self, a):
        return self.distances(a, self.nodes)

    def _items(self, points):
        p = self.as_points(points)
        return [p[i] for i in range(len(p))]

    def pairwise_distances(self, A, B):
        return np.stack([self.distances(a, B) for a in self._items(A)])

    def ball_sums(self, centers, points, values, radius):
        """For each center, the sum of ``values`` over ``points`` at distance < radius."""
        values = np.asarray(values, dtype=float)
        return np.array([values[self.distances(c, points) < radius].sum() for c in self._items(centers)])

    def close_pairs(self, points, radius):
        """Index pairs (i < j) at geodesic distance < radius, sorted."""
        items = self._items(points)
        out = []
        for i, a in enumerate(items):
            d = self.distances(a, points)
            j = np.flatnonzero(d < radius)
            out.extend((i, int(k)) for k in j if k > i)
        return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)

    def ball(self, center, radius):
        if radius <= 0:
            raise UsageError("ball radius must be positive")
        center = self.as_points(center)[0]
        idx = np.flatnonzero(self.node_distances(center) < radius)
        return Ball(self, center, float(radius), idx)

    def node_ball_volume(self, center, radius):
        b = self.ball(center, radius)
        if len(b.indices) == 0:
            raise ResolutionError(
                f"ball of radius {radius:.3g} contains no quadrature node; "
                f"minimum resolvable radius is {self.node_spacing:.3g}"
            )
        return b.mass

    def ball_volume(self, center, radius):
        return self.node_ball_volume(center, radius)

    def require_resolvable(self, radius):
        if radius < self.node_spacing:
            raise ResolutionError(
                f"radius {radius:.3g} is below the quadrature resolution; "
                f"minimum resolvable radius is {self.node_spacing:.3g}"
            )

    def ball_quadrature(self, center, radius, bandwidth):
        """Nodes and weights integrating products of two E_L functions over
        B(center, radius), L = ``bandwidth``.

        The default splits the global quadrature; analytic backends override
        with rules adapted to the ball boundary.
        """
        b = self.ball(center, radius)
        return self.nodes[b.indices], self.weights[b.indices]

    def sample_points(self, count, seed):
        raise NotImplementedError

    @property
    def node_spacing(self):
        raise NotImplementedError

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(repr(self._fingerprint_fields()).encode())
        h.update(np.ascontiguousarray(self.nodes).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()

    def _fingerprint_fields(self):
        return (self.backend,)


def _orthonormal_frame(c):
    """Two unit vectors completing ``c`` to a right-handed orthonormal basis."""
    c = np.asarray(c, dtype=float)
    helper = np.array([1.0, 0.0, 0.0]) if abs(c[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = np.cross(c, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(c, e1)
    return e1, e2


class Sphere(Manifold):
    """Unit sphere S^2 with a Gauss-Legendre (cos theta) x uniform (phi) rule.

    ``rotation`` rotates every quadrature node; it exists so that isometry
    invariance can be checked against an independently placed node set.
    """

    backend = "sphere"

    def __init__(self, n_theta, n_phi=None, rotation=None):
        n_theta = int(n_theta)
        n_phi = int(n_phi) if n_phi is not None else 2 * n_theta
        if n_theta < 1 or n_phi < 1:
            raise UsageError("quadrature sizes must be positive")
        self.n_theta, self.n_phi = n_theta, n_phi
        self.volume = 4.0 * math.pi
        self.injectivity_radius = math.pi
        self.diameter = math.pi
        self.rotation = None if rotation is None else np.asarray(rotation, dtype=float)

        u, wu = np.polynomial.legendre.leggauss(n_theta)
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        U, P = np.meshgrid(u, phi, indexing="ij")
        S = np.sqrt(1.0 - U * U)
        nodes = np.stack([S * np.cos(P), S * np.sin(P), U], axis=-1).reshape(-1, 3)
        weights = np.repeat(wu * (2.0 * math.pi / n_phi), n_phi)
        if self.rotation is not None:
            nodes = nodes @ self.rotation.T
        self.max_exact_degree = min(n_theta - 1, (n_phi - 1) // 2)
        self.quadrature = Quadrature(nodes, weights, 2 * self.max_exact_degree)

    @classmethod
    def for_bandwidth(cls, L, oversample=1, rotation=None):
        """Smallest grid (times ``oversample``) integrating products in E_L exactly."""
        lmax = max(sphharm.max_degree(L), 0)
        n_theta = int(math.ceil(oversample * (lmax + 1)))
        return cls(n_theta, 2 * n_theta, rotation=rotation)

    @property
    def max_bandwidth(self):
        l = self.max_exact_degree
        return (l + 1) * (l + 2) - 1e-9 if l >= 0 else 0.0

    def _fingerprint_fields(self):
        rot = None if self.rotation is None else self.rotation.round(15).tolist()
        return (self.backend, self.n_theta, self.n_phi, rot)

    def as_points(self, points):
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            p = p[None, :]
        if p.ndim != 2 or p.shape[1] != 3:
            raise UsageError(f"sphere points must have shape (n, 3), got {p.shape}")
        if len(p) and np.abs(np.linalg.norm(p, axis=1) - 1.0).max() > 1e-10:
            raise UsageError("sphere points must be unit vectors")
        return p

    def distances(self, a, points):
        a = self.as_points(a)[0]
        p = self.as_points(points)
        dot = p @ a
        cross = np.linalg.norm(np.cross(p, a), axis=1)
        return np.arctan2(cross, dot)

    @staticmethod
    def _chord_to_arc(c):
        return 2.0 * np.arcsin(np.clip(c / 2.0, 0.0, 1.0))

    def pairwise_distances(self, A, B):
        A, B = self.as_points(A), self.as_points(B)
        c = np.sqrt(np.clip(2.0 - 2.0 * (A @ B.T), 0.0, None))
        # chord from the dot product loses accuracy near 0; recompute small ones directly
        small = c < 1e-3
        if np.any(small):
            ia, ib = np.nonzero(small)
            c[ia, ib] = np.linalg.norm(A[ia] - B[ib], axis=1)
        return self._chord_to_arc(c)

    def _pairs_within(self, A, B, radius):
        if radius > math.pi:
            radius = math.pi * (1 + 1e-12)
        chord = 2.0 * math.sin(min(radius, math.pi) / 2.0) * (1 + 1e-12) + 1e-15
        D = cKDTree(A).sparse_distance_matrix(cKDTree(B), chord, output_type="ndarray")
        keep = self._chord_to_arc(D["v"]) < radius
        return D["i"][keep], D["j"][keep]

    def ball_sums(self, centers, points, values, radius):
        C, P = self.as_points(centers), self.as_points(points)
        values = np.asarray(values, dtype=float)
        if radius >= math.pi:
            return np.full(len(C), values.sum())
        i, j = self._pairs_within(C, P, radius)
        return np.bincount(i, weights=values[j], minlength=len(C))

    def close_pairs(self, points, radius):
        P = self.as_points(points)
        i, j = self._pairs_within(P, P, radius)
        keep = i < j
        pairs = np.stack([i[keep], j[keep]], axis=1)
        return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]

    def ball_volume(self, center, radius):
        if radius <= 0:
            raise UsageError("ball radius must be positive")
        self.as_points(center)
        if radius >= math.pi:
            return self.volume
        return 2.0 * math.pi * (1.0 - math.cos(radius))

    def ball_quadrature(self, center, radius, bandwidth):
        """Cap rule: Gauss-Legendre in cos of the polar angle about ``center``
        on [cos r, 1], uniform in azimuth. Exact for polynomials of degree
        2*lmax, hence for products of two E_L functions."""
        c = self.as_points(center)[0]
        degree = 2 * max(sphharm.max_degree(bandwidth), 0)
        if radius >= math.pi:
            radius = math.pi
        n_u = degree // 2 + 1
        n_a = degree + 1
        x, w = np.polynomial.legendre.leggauss(n_u)
        lo = math.cos(radius)
        u = lo + (x + 1.0) * (1.0 - lo) / 2.0
        wu = w * (1.0 - lo) / 2.0
        a = 2.0 * math.pi * np.arange(n_a) / n_a
        U, A = np.meshgrid(u, a, indexing="ij")
        S = np.sqrt(np.clip(1.0 - U * U, 0.0, None))
        e1, e2 = _orthonormal_frame(c)
        pts = (S * np.cos(A))[..., None] * e1 + (S * np.sin(A))[..., None] * e2 + U[..., None] * c
        pts = pts.reshape(-1, 3)
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        return pts, np.repeat(wu * (2.0 * math.pi / n_a), n_a)

    def sample_points(self, count, seed):
        if count < 1:
            raise UsageError("count must be >= 1")
        g = np.random.default_rng(seed).standard_normal((count, 3))
        return g / np.linalg.norm(g, axis=1, keepdims=True)

    @property
    def node_spacing(self):
        if not hasattr(self, "_spacing"):
            # chord-space nearest neighbour, converted to geodesic length
            d, _ = cKDTree(self.nodes).query(self.nodes, k=2)
            self._spacing = float(2.0 * np.arcsin(min(d[:, 1].max() / 2.0, 1.0)))
        return self._spacing

    def rotate(self, points):
        p = self.as_points(points)
        return p if self.rotation is None else p @ self.rotation.T


class Torus(Manifold):
    """Flat torus [0, a) x [0, b) with opposite sides identified; uniform grid rule."""

    backend = "torus"

    def __init__(self, side_x, side_y, n_x, n_y=None):
        self.side_x, self.side_y = float(side_x), float(side_y)
        if self.side_x <= 0 or self.side_y <= 0:
            raise UsageError("torus sides must be positive")
        self.n_x = int(n_x)
        self.n_y = int(n_y) if n_y is not None else int(n_x)
        self.volume = self.side_x * self.side_y
        self.injectivity_radius = min(self.side_x, self.side_y) / 2.0
        self.diameter = math.hypot(self.side_x, self.side_y) / 2.0
        gx = self.side_x * np.arange(self.n_x) / self.n_x
        gy = self.side_y * np.arange(self.n_y) / self.n_y
        X, Y = np.meshgrid(gx, gy, indexing="ij")
        nodes = np.stack([X.ravel(), Y.ravel()], axis=-1)
        weights = np.full(len(nodes), self.volume / (self.n_x * self.n_y))
        # trigonometric products with |frequency index| <= K integrate exactly when 2K < n
        self.max_index = ((self.n_x - 1) // 2, (self.n_y - 1) // 2)
        self.quadrature = Quadrature(nodes, weights, min(self.n_x, self.n_y) - 1)

    @classmethod
    def for_bandwidth(cls, side_x, side_y, L, oversample=1):
        kx = int(math.floor(math.sqrt(max(L, 0.0)) * side_x / (2.0 * math.pi)))
        ky = int(math.floor(math.sqrt(max(L, 0.0)) * side_y / (2.0 * math.pi)))
        return cls(side_x, side_y, int(math.ceil(oversample * (2 * kx + 2))),
                   int(math.ceil(oversample * (2 * ky + 2))))

    @property
    def max_bandwidth(self):
        kx, ky = self.max_index
        fx = 2.0 * math.pi * (kx + 1) / self.side_x
        fy = 2.0 * math.pi * (ky + 1) / self.side_y
        return min(fx, fy) ** 2 * (1.0 - 1e-12)

    def _fingerprint_fields(self):
        return (self.backend, self.side_x, self.side_y, self.n_x, self.n_y)

    def as_points(self, points):
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            p = p[None, :]
        if p.ndim != 2 or p.shape[1] != 2:
            raise UsageError(f"torus points must have shape (n, 2), got {p.shape}")
        if len(p) and (np.any(p < 0) or np.any(p[:, 0] >= self.side_x) or np.any(p[:, 1] >= self.side_y)):
            raise UsageError("torus points must lie in [0, side_x) x [0, side_y)")
        return p

    def wrap(self, points):
        p = np.asarray(points, dtype=float).copy()
        p[..., 0] = np.mod(p[..., 0], self.side_x)
        p[..., 1] = np.mod(p[..., 1], self.side_y)
        p[..., 0][p[..., 0] >= self.side_x] = 0.0
        p[..., 1][p[..., 1] >= self.side_y] = 0.0
        return p

    def offsets(self, a, points):
        """Shortest displacement vectors from ``a`` to ``points``."""
        a = self.as_points(a)[0]
        d = self.as_points(points) - a
        d[:, 0] -= self.side_x * np.round(d[:, 0] / self.side_x)
        d[:, 1] -= self.side_y * np.round(d[:, 1] / self.side_y)
        return d

    def distances(self, a, points):
        return np.linalg.norm(self.offsets(a, points), axis=1)

    def pairwise_distances(self, A, B):
        A, B = self.as_points(A), self.as_points(B)
        dx = B[None, :, 0] - A[:, None, 0]
        dy = B[None, :, 1] - A[:, None, 1]
        dx -= self.side_x * np.round(dx / self.side_x)
        dy -= self.side_y * np.round(dy / self.side_y)
        return np.hypot(dx, dy)

    def _pairs_within(self, A, B, radius):
        box = [self.side_x, self.side_y]
        D = cKDTree(A, boxsize=box).sparse_distance_matrix(cKDTree(B, boxsize=box), radius, output_type="ndarray")
        keep = D["v"] < radius
        return D["i"][keep], D["j"][keep]

    def ball_sums(self, centers, points, values, radius):
        C, P = self.as_points(centers), self.as_points(points)
        i, j = self._pairs_within(C, P, radius)
        return np.bincount(i, weights=np.asarray(values, dtype=float)[j], minlength=len(C))

    def close_pairs(self, points, radius):
        P = self.as_points(points)
        i, j = self._pairs_within(P, P, radius)
        keep = i < j
        pairs = np.stack([i[keep], j[keep]], axis=1)
        return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]

    def ball_volume(self, center, radius):
        if radius <= 0:
            raise UsageError("ball radius must be positive")
        self.as_points(center)
        a, b = self.side_x, self.side_y
        if radius <= min(a, b) / 2.0:
            return math.pi * radius * radius
        if radius >= self.diameter:
            return self.volume

        # the ball is the set of centred offsets (u, v) in the cell with u^2 + v^2 < r^2
        def chord(u):
            return min(b, 2.0 * math.sqrt(max(radius * radius - u * u, 0.0)))

        lim = min(radius, a / 2.0)
        pts = [p for p in (math.sqrt(max(radius * radius - b * b / 4.0, 0.0)),) if 0 < p < lim]
        val, _ = integrate.quad(chord, -lim, lim, points=pts + [-p for p in pts] or None,
                                epsabs=1e-13, epsrel=1e-13, limit=200)
        return val

    def ball_quadrature(self, center, radius, bandwidth):
        """Polar Gauss rule on the disc; falls back to node splitting once the
        disc wraps onto itself."""
        c = self.as_points(center)[0]
        if radius > self.injectivity_radius:
            return super().ball_quadrature(center, radius, bandwidth)
        # integrands carry frequencies up to 2 sqrt(L); Bessel tails vanish past ~e*z/2
        z = 2.0 * math.sqrt(max(bandwidth, 0.0)) * radius
        n_r = int(z / 2.0) + 16
        n_a = int(1.5 * z) + 24
        x, w = np.polynomial.legendre.leggauss(n_r)
        r = (x + 1.0) * radius / 2.0
        wr = w * radius / 2.0 * r
        a = 2.0 * math.pi * np.arange(n_a) / n_a
        R, A = np.meshgrid(r, a, indexing="ij")
        pts = np.stack([c[0] + R * np.cos(A), c[1] + R * np.sin(A)], axis=-1).reshape(-1, 2)
        return self.wrap(pts), np.repeat(wr * (2.0 * math.pi / n_a), n_a)

    def sample_points(self, count, seed):
        if count < 1:
            raise UsageError("count must be >= 1")
        u = np.random.default_rng(seed).random((count, 2))
        return self.wrap(u * [self.side_x, self.side_y])

    @property
    def node_spacing(self):
        return max(self.side_x / self.n_x, self.side_y / self.n_y)


def concat_points(manifold, *groups):
    """Concatenate point groups of one manifold (arrays or MeshPoints)."""
    groups = [manifold.as_points(g) for g in groups if len(g)]
    if not groups:
        raise UsageError("nothing to concatenate")
    if hasattr(groups[0], "tri"):
        from .mesh import MeshPoints

        return MeshPoints(manifold, np.concatenate([g.tri for g in groups]),
                          np.concatenate([g.bary for g in groups]))
    return np.concatenate(groups)


def take_points(points, idx):
    idx = np.asarray(idx, dtype=np.int64)
    if hasattr(points, "tri"):
        return type(points)(points.mesh, points.tri[idx], points.bary[idx])
    return np.asarray(points)[idx]


def repeat_points(manifold, points, q):
    """The point list repeated q times (q copies one after another)."""
    return concat_points(manifold, *([points] * q))


def point_from_json(manifold, value):
    """One point from JSON: coordinates on analytic backends; on meshes a vertex id
    or {"tri": t, "bary": [a, b, c]}."""
    if manifold.backend == "mesh":
        if isinstance(value, int):
            if not 0 <= value < len(manifold.vertices):
                raise UsageError(f"vertex id {value} out of range")
            return manifold.vertex(value)
        if isinstance(value, dict) and "tri" in value:
            return manifold.as_points((value["tri"], value["bary"]))
        raise UsageError("mesh points are vertex ids or {\"tri\", \"bary\"} objects")
    p = np.asarray(value, dtype=float)
    if manifold.backend == "sphere" and p.shape == (3,):
        p = p / np.linalg.norm(p)
    return manifold.as_points(p[None, :])


def points_from_json(manifold, values):
    return concat_points(manifold, *[point_from_json(manifold, v) for v in values])
