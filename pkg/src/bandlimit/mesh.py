"""Closed triangle meshes as manifolds.

Vertices may live in any ambient R^d (d >= 3), which lets a flat torus be
meshed isometrically in R^4.  Quadrature nodes are the vertices with lumped
(barycentric) masses.  Geodesic distance is the shortest path in the edge graph
after one round of Steiner midpoint insertion: every triangle contributes its
three vertices and three edge midpoints, fully connected by straight segments.
"""

import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import dijkstra

from .errors import DegenerateMeshError, MeshNotClosedError, UsageError
from .manifold import Ball, Manifold, Quadrature


@dataclass(frozen=True)
class MeshPoints:
    """Points on a mesh as (triangle id, barycentric triple)."""

    mesh: "Mesh" = field(repr=False)
    tri: np.ndarray
    bary: np.ndarray

    def __len__(self):
        return len(self.tri)

    def __getitem__(self, item):
        tri = np.atleast_1d(self.tri[item])
        bary = self.bary[item].reshape(-1, 3)
        return MeshPoints(self.mesh, tri, bary)

    @property
    def positions(self):
        v = self.mesh.vertices[self.mesh.faces[self.tri]]
        return np.einsum("nk,nkd->nd", self.bary, v)


def read_off(path):
    with open(path) as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0] != "OFF":
        raise UsageError(f"{path}: not an ASCII OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4
    verts = np.array(tokens[pos:pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        k = int(tokens[pos])
        idx = [int(t) for t in tokens[pos + 1:pos + 1 + k]]
        pos += 1 + k
        if k < 3:
            raise UsageError(f"{path}: face with {k} vertices")
        faces.extend([idx[0], idx[j], idx[j + 1]] for j in range(1, k - 1))
    return verts, np.array(faces, dtype=np.int64)


def write_off(path, vertices, faces):
    vertices = np.asarray(vertices)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise UsageError("OFF files hold vertices in R^3")
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(vertices)} {len(faces)} 0\n")
        for v in vertices:
            fh.write(" ".join(repr(float(x)) for x in v) + "\n")
        for f in faces:
            fh.write("3 " + " ".join(str(int(i)) for i in f) + "\n")


def icosphere(subdivisions):
    """Unit icosphere: icosahedron refined by midpoint subdivision, projected to S^2."""
    t = (1.0 + math.sqrt(5.0)) / 2.0
    verts = [(-1, t, 0), (1, t, 0), (-1, -t, 0), (1, -t, 0),
             (0, -1, t), (0, 1, t), (0, -1, -t), (0, 1, -t),
             (t, 0, -1), (t, 0, 1), (-t, 0, -1), (-t, 0, 1)]
    faces = [(0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
             (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
             (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
             (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1)]
    verts = [np.array(v, dtype=float) / np.linalg.norm(v) for v in verts]
    for _ in range(subdivisions):
        cache = {}

        def mid(i, j):
            key = (min(i, j), max(i, j))
            if key not in cache:
                m = verts[i] + verts[j]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = new
    return np.array(verts), np.array(faces, dtype=np.int64)


def flat_torus_mesh(side_x, side_y, n_x, n_y=None):
    """Clifford embedding of the flat torus in R^4, triangulated on an n_x x n_y grid."""
    n_y = n_y or n_x
    i, j = np.meshgrid(np.arange(n_x), np.arange(n_y), indexing="ij")
    ax, ay = 2 * np.pi * i.ravel() / n_x, 2 * np.pi * j.ravel() / n_y
    rx, ry = side_x / (2 * np.pi), side_y / (2 * np.pi)
    verts = np.stack([rx * np.cos(ax), rx * np.sin(ax), ry * np.cos(ay), ry * np.sin(ay)], axis=1)

    def vid(a, b):
        return (a % n_x) * n_y + (b % n_y)

    faces = []
    for a in range(n_x):
        for b in range(n_y):
            faces.append((vid(a, b), vid(a + 1, b), vid(a + 1, b + 1)))
            faces.append((vid(a, b), vid(a + 1, b + 1), vid(a, b + 1)))
    return verts, np.array(faces, dtype=np.int64)


def triangle_areas(vertices, faces):
    e1 = vertices[faces[:, 1]] - vertices[faces[:, 0]]
    e2 = vertices[faces[:, 2]] - vertices[faces[:, 0]]
    a11 = np.einsum("ij,ij->i", e1, e1)
    a22 = np.einsum("ij,ij->i", e2, e2)
    a12 = np.einsum("ij,ij->i", e1, e2)
    return 0.5 * np.sqrt(np.clip(a11 * a22 - a12 * a12, 0.0, None))


def check_closed(faces, n_vertices):
    e = np.sort(np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]]), axis=1)
    key = e[:, 0] * n_vertices + e[:, 1]
    _, counts = np.unique(key, return_counts=True)
    if np.any(counts != 2):
        bad = int(np.sum(counts != 2))
        raise MeshNotClosedError(f"{bad} edges are not shared by exactly two triangles")


def cotangent_laplacian(vertices, faces):
    """Stiffness matrix K (symmetric PSD, constants in its kernel) and lumped vertex masses.

    K_ij = -(cot a_ij + cot b_ij)/2 for the two angles opposite edge ij, so
    f^T K f is the Dirichlet energy of the piecewise linear interpolant.
    """
    vertices = np.asarray(vertices, dtype=float)
    faces = np.asarray(faces, dtype=np.int64)
    n = len(vertices)
    check_closed(faces, n)
    areas = triangle_areas(vertices, faces)
    scale = np.mean(areas) if len(areas) else 0.0
    if np.any(areas <= 1e-14 * max(scale, 1e-300)):
        raise DegenerateMeshError(f"{int(np.sum(areas <= 1e-14 * scale))} triangles have zero area")
    rows, cols, vals = [], [], []
    for k in range(3):
        i, j, o = faces[:, (k + 1) % 3], faces[:, (k + 2) % 3], faces[:, k]
        u = vertices[i] - vertices[o]
        v = vertices[j] - vertices[o]
        cot = np.einsum("ij,ij->i", u, v) / (2.0 * areas)
        rows += [i, j]
        cols += [j, i]
        vals += [-0.5 * cot, -0.5 * cot]
    K = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    K = K - sparse.diags(np.asarray(K.sum(axis=1)).ravel())
    mass = np.zeros(n)
    np.add.at(mass, faces.ravel(), np.repeat(areas / 3.0, 3))
    return K.tocsr(), mass


def triangle_gradient_operators(vertices, faces):
    """Per-triangle (F, 3, d) arrays G with grad f = sum_k f[face[k]] * G[:, k]."""
    x0 = vertices[faces[:, 0]]
    e1 = vertices[faces[:, 1]] - x0
    e2 = vertices[faces[:, 2]] - x0
    g11 = np.einsum("ij,ij->i", e1, e1)
    g22 = np.einsum("ij,ij->i", e2, e2)
    g12 = np.einsum("ij,ij->i", e1, e2)
    det = g11 * g22 - g12 * g12
    # rows of [e1 e2] G^{-1}: gradients of the barycentric coordinates 1 and 2
    b1 = ((g22 / det)[:, None] * e1 - (g12 / det)[:, None] * e2)
    b2 = ((g11 / det)[:, None] * e2 - (g12 / det)[:, None] * e1)
    return np.stack([-(b1 + b2), b1, b2], axis=1)


class Mesh(Manifold):
    backend = "mesh"

    def __init__(self, vertices, faces, injectivity_radius=None, steiner_points=3):
        self.steiner_points = int(steiner_points)
        self.vertices = np.asarray(vertices, dtype=float)
        self.faces = np.asarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] < 3:
            raise UsageError("mesh vertices must have shape (n, d) with d >= 3")
        self.stiffness, self.mass = cotangent_laplacian(self.vertices, self.faces)
        self.areas = triangle_areas(self.vertices, self.faces)
        self.volume = float(self.areas.sum())
        n = len(self.vertices)
        # one incident triangle per vertex, so vertices double as MeshPoints
        owner = np.empty(n, dtype=np.int64)
        corner = np.empty(n, dtype=np.int64)
        for k in range(3):
            owner[self.faces[:, k]] = np.arange(len(self.faces))
            corner[self.faces[:, k]] = k
        bary = np.zeros((n, 3))
        bary[np.arange(n), corner] = 1.0
        self.vertex_points = MeshPoints(self, owner, bary)
        self.quadrature = Quadrature(self.vertex_points, self.mass, None)
        self._build_graph()
        self.diameter = self._estimate_diameter()
        self.injectivity_radius = float(injectivity_radius) if injectivity_radius else 0.1 * self.diameter
        if self.injectivity_radius <= 0:
            raise UsageError("injectivity radius must be positive")

    @classmethod
    def from_off(cls, path, injectivity_radius=None):
        v, f = read_off(path)
        return cls(v, f, injectivity_radius)

    @classmethod
    def icosphere(cls, subdivisions, injectivity_radius=None):
        return cls(*icosphere(subdivisions), injectivity_radius)

    def _fingerprint_fields(self):
        return (self.backend, self.injectivity_radius, self.steiner_points)

    def fingerprint(self):
        h = hashlib.sha256()
        h.update(repr(self._fingerprint_fields()).encode())
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.faces).tobytes())
        return h.hexdigest()

    def _build_graph(self):
        f = self.faces
        nv = len(self.vertices)
        k = self.steiner_points
        e = np.sort(np.concatenate([f[:, [1, 2]], f[:, [2, 0]], f[:, [0, 1]]]), axis=1)
        edges, inverse = np.unique(e[:, 0] * nv + e[:, 1], return_inverse=True)
        ea, eb = edges // nv, edges % nv
        self.edges = np.stack([ea, eb], axis=1)
        t = np.arange(1, k + 1) / (k + 1)
        steiner = (self.vertices[ea][:, None, :] * (1.0 - t)[None, :, None]
                   + self.vertices[eb][:, None, :] * t[None, :, None]).reshape(-1, self.vertices.shape[1])
        self.graph_positions = np.concatenate([self.vertices, steiner])
        # graph nodes of each triangle: its corners, then the Steiner points of its three edges
        edge_of = inverse.reshape(3, -1).T
        ids = nv + edge_of[:, :, None] * k + np.arange(k)[None, None, :]
        self.tri_nodes = np.concatenate([f, ids.reshape(len(f), -1)], axis=1)
        a, b = np.triu_indices(self.tri_nodes.shape[1], k=1)
        pairs = np.sort(np.stack([self.tri_nodes[:, a].ravel(), self.tri_nodes[:, b].ravel()], axis=1), axis=1)
        pairs = np.unique(pairs, axis=0)
        w = np.linalg.norm(self.graph_positions[pairs[:, 0]] - self.graph_positions[pairs[:, 1]], axis=1)
        ng = len(self.graph_positions)
        G = sparse.coo_matrix((w, (pairs[:, 0], pairs[:, 1])), shape=(ng, ng))
        self.graph = (G + G.T).tocsr()

    def _estimate_diameter(self):
        d0 = dijkstra(self.graph, directed=False, indices=0)[: len(self.vertices)]
        far = int(np.argmax(d0))
        d1 = dijkstra(self.graph, directed=False, indices=far)[: len(self.vertices)]
        return float(d1.max())

    @property
    def nodes(self):
        return self.vertex_points

    @cached_property
    def node_spacing(self):
        ev = self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]]
        return float(np.linalg.norm(ev, axis=1).max())

    def as_points(self, points):
        if isinstance(points, MeshPoints):
            if points.mesh is not self:
                raise UsageError("points belong to a different mesh")
            return points
        if isinstance(points, tuple) and len(points) == 2:
            tri = np.atleast_1d(np.asarray(points[0], dtype=np.int64))
            bary = np.asarray(points[1], dtype=float).reshape(-1, 3)
            if np.any(tri < 0) or np.any(tri >= len(self.faces)):
                raise UsageError("triangle id out of range")
            if np.any(bary < -1e-12) or np.abs(bary.sum(axis=1) - 1.0).max() > 1e-12:
                raise UsageError("barycentric coordinates must be nonnegative and sum to 1")
            return MeshPoints(self, tri, bary)
        raise UsageError("mesh points must be MeshPoints or a (triangle ids, barycentrics) pair")

    def vertex(self, i):
        return self.vertex_points[int(i)]

    def _graph_distances_from(self, a, limit=np.inf):
        """Distances from the single point ``a`` to every graph node."""
        pos = a.positions[0]
        srcs = self.tri_nodes[a.tri[0]]
        hot = np.flatnonzero(a.bary[0] == 1.0)
        if len(hot):
            v = self.faces[a.tri[0], hot[0]]
            return dijkstra(self.graph, directed=False, indices=v, limit=limit)
        offs = np.linalg.norm(self.graph_positions[srcs] - pos, axis=1)
        D = dijkstra(self.graph, directed=False, indices=srcs, limit=limit)
        return np.min(D + offs[:, None], axis=0)

    def distances(self, a, points, limit=np.inf):
        a = self.as_points(a)[0]
        p = self.as_points(points)
        D = self._graph_distances_from(a, limit)
        nodes = self.tri_nodes[p.tri]
        pos = p.positions
        hops = np.linalg.norm(self.graph_positions[nodes] - pos[:, None, :], axis=2)
        out = np.min(D[nodes] + hops, axis=1)
        same = p.tri == a.tri[0]
        if np.any(same):
            out[same] = np.linalg.norm(pos[same] - a.positions[0], axis=1)
        return out

    def node_distances(self, a, limit=np.inf):
        a = self.as_points(a)[0]
        D = self._graph_distances_from(a, limit)[: len(self.vertices)]
        same = self.faces[a.tri[0]]
        D[same] = np.linalg.norm(self.vertices[same] - a.positions[0], axis=1)
        return D

    def ball(self, center, radius):
        if radius <= 0:
            raise UsageError("ball radius must be positive")
        c = self.as_points(center)[0]
        idx = np.flatnonzero(self.node_distances(c, limit=radius) < radius)
        return Ball(self, c, float(radius), idx)

    def _dists_limited(self, c, points, radius):
        if points is self.vertex_points:
            return self.node_distances(c, limit=radius)
        return self.distances(c, points, limit=radius)

    def ball_sums(self, centers, points, values, radius):
        values = np.asarray(values, dtype=float)
        return np.array([values[self._dists_limited(c, points, radius) < radius].sum()
                         for c in self._items(centers)])

    def close_pairs(self, points, radius):
        out = []
        for i, c in enumerate(self._items(points)):
            j = np.flatnonzero(self._dists_limited(c, points, radius) < radius)
            out.extend((i, int(k)) for k in j if k > i)
        return np.array(sorted(out), dtype=np.int64).reshape(-1, 2)

    def ball_quadrature(self, center, radius, bandwidth):
        b = self.ball(center, radius)
        return self.vertex_points[b.indices], self.mass[b.indices]

    def sample_points(self, count, seed):
        if count < 1:
            raise UsageError("count must be >= 1")
        rng = np.random.default_rng(seed)
        tri = rng.choice(len(self.faces), size=count, p=self.areas / self.volume)
        r1, r2 = rng.random(count), rng.random(count)
        s = np.sqrt(r1)
        bary = np.stack([1.0 - s, s * (1.0 - r2), s * r2], axis=1)
        return MeshPoints(self, tri, bary)
