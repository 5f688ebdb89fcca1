"""Orthonormal eigenbases of -Laplacian truncated at a bandwidth L.

Sphere: real spherical harmonics, lambda = l(l+1).  Torus: real Fourier modes,
lambda = |k|^2.  Mesh: cotangent stiffness against lumped mass.  Every basis is
orthonormal for the manifold's quadrature.
"""

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.linalg
from scipy import sparse
from scipy.sparse.linalg import eigsh

from . import sphharm
from .errors import PreconditionError, ResolutionError, SolverError, UsageError
from .manifold import Sphere, Torus
from .mesh import Mesh, MeshPoints, cotangent_laplacian, triangle_gradient_operators

# relative slack on the inclusive cutoff lambda <= L, so float ties stay together
CUTOFF_RTOL = 1e-12
SOLVER_TOL = 1e-9


def sigma(m):
    """Volume of the unit ball in R^m."""
    return 2.0 * math.pi ** (m / 2.0) / (m * math.gamma(m / 2.0))


def weyl_main_term(volume, m, L):
    return volume * sigma(m) / (2.0 * math.pi) ** m * L ** (m / 2.0)


class _SphereModes:
    def __init__(self, lmax):
        self.lmax = lmax

    def eigenvalues(self):
        l = np.repeat(np.arange(self.lmax + 1), 2 * np.arange(self.lmax + 1) + 1)
        return (l * (l + 1)).astype(float)

    def labels(self):
        return np.array([(l, m) for l in range(self.lmax + 1) for m in range(-l, l + 1)], dtype=np.int64).reshape(-1, 2)

    def values(self, points):
        return sphharm.real_sph_harm(self.lmax, points)

    def gradients(self, points):
        return sphharm.real_sph_harm(self.lmax, points, gradient=True)[1]

    def blocks(self, points):
        for rows, vals, _ in sphharm.iter_blocks(self.lmax, points):
            yield rows, vals


class _TorusModes:
    def __init__(self, torus, L):
        a, b = torus.side_x, torus.side_y
        nmax = int(math.floor(math.sqrt(L) * a / (2 * math.pi))) + 1
        mmax = int(math.floor(math.sqrt(L) * b / (2 * math.pi))) + 1
        rows = []
        for n in range(0, nmax + 1):
            for m in range(-mmax, mmax + 1):
                if n == 0 and m < 0:
                    continue
                lam = (2 * math.pi * n / a) ** 2 + (2 * math.pi * m / b) ** 2
                if lam > L * (1 + CUTOFF_RTOL):
                    continue
                if n == 0 and m == 0:
                    rows.append((lam, n, m, 0))
                else:
                    rows.append((lam, n, m, 1))
                    rows.append((lam, n, m, 2))
        # (lambda, k_x, k_y, cos before sin)
        rows.sort()
        self.table = np.array(rows, dtype=float).reshape(-1, 4)
        self.kx = 2 * math.pi * self.table[:, 1] / a
        self.ky = 2 * math.pi * self.table[:, 2] / b
        self.kind = self.table[:, 3].astype(int)
        self.vol = torus.volume

    def eigenvalues(self):
        return self.table[:, 0].copy()

    def labels(self):
        return self.table[:, 1:].astype(np.int64)

    def _phase(self, points):
        p = np.asarray(points, dtype=float)
        return np.outer(self.kx, p[:, 0]) + np.outer(self.ky, p[:, 1])

    def values(self, points, rows=slice(None)):
        ph = self._phase(points)[rows]
        kind = self.kind[rows]
        c = math.sqrt(2.0 / self.vol)
        out = np.where((kind == 1)[:, None], c * np.cos(ph), c * np.sin(ph))
        out[kind == 0] = 1.0 / math.sqrt(self.vol)
        return out

    def gradients(self, points):
        ph = self._phase(points)
        c = math.sqrt(2.0 / self.vol)
        amp = np.where((self.kind == 1)[:, None], -c * np.sin(ph), c * np.cos(ph))
        amp[self.kind == 0] = 0.0
        return np.stack([amp * self.kx[:, None], amp * self.ky[:, None]], axis=-1)

    def blocks(self, points, size=512):
        for s in range(0, len(self.kind), size):
            rows = np.arange(s, min(s + size, len(self.kind)))
            yield rows, self.values(points, rows)


class _MeshModes:
    def __init__(self, mesh, vectors):
        self.mesh = mesh
        self.vectors = vectors

    def values(self, points):
        if points is self.mesh.vertex_points:
            return self.vectors
        p = self.mesh.as_points(points)
        corner = self.vectors[:, self.mesh.faces[p.tri]]
        return np.einsum("kpc,pc->kp", corner, p.bary)

    @cached_property
    def face_gradients(self):
        G = triangle_gradient_operators(self.mesh.vertices, self.mesh.faces)
        vals = self.vectors[:, self.mesh.faces]
        return np.einsum("kfc,fcd->kfd", vals, G)

    @cached_property
    def vertex_gradients(self):
        # incident-area weighted average of the per-face constant gradients
        mesh = self.mesh
        nf = len(mesh.faces)
        W = sparse.csr_matrix(
            (np.repeat(mesh.areas, 3), (mesh.faces.ravel(), np.repeat(np.arange(nf), 3))),
            shape=(len(mesh.vertices), nf),
        )
        W = sparse.diags(1.0 / np.asarray(W.sum(axis=1)).ravel()) @ W
        fg = self.face_gradients
        return np.stack([(W @ fg[:, :, d].T).T for d in range(fg.shape[2])], axis=-1)

    def gradients(self, points):
        if points is self.mesh.vertex_points:
            return self.vertex_gradients
        p = self.mesh.as_points(points)
        return self.face_gradients[:, p.tri]

    def blocks(self, points, size=512):
        vals = self.values(points)
        for s in range(0, vals.shape[0], size):
            rows = np.arange(s, min(s + size, vals.shape[0]))
            yield rows, vals[rows]


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Eigenpairs with lambda <= L and their values on the quadrature nodes.

    ``values[i, k]`` is phi_i at node k; ``gradient_values`` has shape
    (k_L, n_nodes, c) with c tangent (sphere, torus) or ambient (mesh) components.
    """

    manifold: object = field(repr=False)
    bandwidth: float
    eigenvalues: np.ndarray
    labels: np.ndarray | None = field(default=None, repr=False)
    _modes: object = field(default=None, repr=False)
    _values: np.ndarray | None = field(default=None, repr=False)

    @property
    def k(self):
        return len(self.eigenvalues)

    @cached_property
    def values(self):
        if self._values is not None:
            return self._values
        return np.ascontiguousarray(self.evaluate(self.manifold.nodes))

    @cached_property
    def gradient_values(self):
        return self.evaluate_gradient(self.manifold.nodes)

    def evaluate(self, points):
        """(k_L, p) eigenfunction values at arbitrary points."""
        if self._modes is None:
            raise UsageError("basis has no analytic evaluator")
        if isinstance(self._modes, _MeshModes):
            return self._modes.values(points)[: self.k]
        return self._modes.values(self.manifold.as_points(points))[: self.k]

    def evaluate_gradient(self, points):
        if isinstance(self._modes, _MeshModes):
            return self._modes.gradients(points)[: self.k]
        return self._modes.gradients(self.manifold.as_points(points))[: self.k]

    @property
    def face_gradients(self):
        if not isinstance(self._modes, _MeshModes):
            raise UsageError("face gradients exist only for mesh bases")
        return self._modes.face_gradients[: self.k]

    def kernel_diagonal(self, points=None):
        """sum_i phi_i(z)^2 at nodes (or ``points``), accumulated block by block."""
        if points is None and "values" in self.__dict__:
            return np.einsum("ij,ij->j", self.values, self.values)
        pts = self.manifold.nodes if points is None else points
        if isinstance(self._modes, _MeshModes):
            v = self.evaluate(pts)
            return np.einsum("ij,ij->j", v, v)
        pts = self.manifold.as_points(pts)
        out = np.zeros(len(pts))
        for rows, vals in self._modes.blocks(pts):
            keep = rows < self.k
            if np.any(keep):
                out += np.einsum("ij,ij->j", vals[keep], vals[keep])
        return out

    def gram(self):
        v = self.values
        return (v * self.manifold.weights) @ v.T

    def truncate(self, L):
        """Sub-basis with lambda <= L; shares the node values."""
        k = int(np.searchsorted(self.eigenvalues, L * (1 + CUTOFF_RTOL), side="right"))
        vals = self.values[:k] if (self._values is not None or "values" in self.__dict__) else None
        labels = None if self.labels is None else self.labels[:k]
        return EigenBasis(self.manifold, float(L), self.eigenvalues[:k], labels, self._modes, vals)


def mesh_laplacian(mesh):
    """Cotangent stiffness operator and lumped mass weights of a closed mesh."""
    if isinstance(mesh, Mesh):
        return mesh.stiffness, mesh.mass
    vertices, faces = mesh
    return cotangent_laplacian(vertices, faces)


def _orthonormalize_clusters(lam, V, mass):
    """Deterministic M-orthonormal basis inside each near-degenerate cluster,
    then a sign convention: the largest-magnitude entry of every vector is positive."""
    n = len(lam)
    start = 0
    scale = max(abs(lam[-1]), 1.0)
    while start < n:
        stop = start + 1
        while stop < n and lam[stop] - lam[stop - 1] <= 1e-8 * scale:
            stop += 1
        block = V[:, start:stop]
        G = block.T @ (mass[:, None] * block)
        R = np.linalg.cholesky(G).T
        V[:, start:stop] = scipy.linalg.solve_triangular(R, block.T, trans="T").T
        start = stop
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(n)])
    signs[signs == 0] = 1.0
    return V * signs


def _solve_mesh(mesh, L):
    K, mass = mesh.stiffness, mesh.mass
    n = len(mass)
    cutoff = L * (1 + CUTOFF_RTOL)
    guess = int(1.3 * mesh.volume * L / (4 * math.pi)) + 16
    if n <= 4000 or guess > n // 3:
        lam, V = scipy.linalg.eigh(K.toarray(), np.diag(mass), subset_by_value=(-np.inf, cutoff), driver="gvx")
    else:
        k = guess
        while True:
            lam, V = eigsh(K, k=min(k, n - 2), M=sparse.diags(mass).tocsc(), sigma=-1e-3 * max(L, 1.0), which="LM", tol=SOLVER_TOL)
            order = np.argsort(lam)
            lam, V = lam[order], V[:, order]
            if lam[-1] > cutoff or k >= n - 2:
                break
            k = int(k * 1.5) + 8
        keep = lam <= cutoff
        lam, V = lam[keep], V[:, keep]
    if len(lam) >= n:
        raise ResolutionError(f"mesh with {n} vertices cannot resolve L={L}; every discrete mode is included")
    if len(lam) == 0:
        raise SolverError("eigensolver returned no eigenpairs")
    # constant mode pinned exactly
    lam = lam.copy()
    lam[0] = 0.0
    V[:, 0] = 1.0 / math.sqrt(mesh.volume)
    V = _orthonormalize_clusters(lam, V, mass)
    V[:, 0] = 1.0 / math.sqrt(mesh.volume)
    res = K @ V - (mass[:, None] * V) * lam[None, :]
    rel = np.linalg.norm(res, axis=0) / np.maximum(np.abs(lam) * np.linalg.norm(mass[:, None] * V, axis=0), 1e-300)
    rel[0] = np.linalg.norm(res[:, 0])
    if np.nanmax(rel) > SOLVER_TOL:
        raise SolverError(f"eigenpair residual {np.nanmax(rel):.2e} exceeds {SOLVER_TOL:.0e}")
    return lam, np.ascontiguousarray(V.T)


def build_basis(manifold, L, cache_dir=None):
    """Eigenbasis of E_L (inclusive cutoff lambda <= L, clusters never split)."""
    if not L > 0:
        raise PreconditionError("bandwidth L must be positive")
    if cache_dir is not None:
        path = cache_path(manifold, L, cache_dir)
        if path.exists():
            return load_basis(path, manifold)
    if isinstance(manifold, Sphere):
        lmax = sphharm.max_degree(L)
        if lmax > manifold.max_exact_degree:
            raise ResolutionError(
                f"sphere quadrature resolves degrees <= {manifold.max_exact_degree}; "
                f"maximum admissible L is {manifold.max_exact_degree * (manifold.max_exact_degree + 1)}"
            )
        modes = _SphereModes(lmax)
        basis = EigenBasis(manifold, float(L), modes.eigenvalues(), modes.labels(), modes)
    elif isinstance(manifold, Torus):
        if L > manifold.max_bandwidth:
            raise ResolutionError(f"torus grid too coarse; maximum admissible L is below {manifold.max_bandwidth:.6g}")
        modes = _TorusModes(manifold, L)
        basis = EigenBasis(manifold, float(L), modes.eigenvalues(), modes.labels(), modes)
    elif isinstance(manifold, Mesh):
        lam, V = _solve_mesh(manifold, L)
        basis = EigenBasis(manifold, float(L), lam, None, _MeshModes(manifold, V), V)
    else:
        raise UsageError(f"unsupported manifold {type(manifold).__name__}")
    if cache_dir is not None:
        save_basis(cache_path(manifold, L, cache_dir), basis)
    return basis


def weyl_defect(basis):
    m = basis.manifold.dimension
    return basis.k / weyl_main_term(basis.manifold.volume, m, basis.bandwidth) - 1.0


def cache_path(manifold, L, cache_dir):
    return Path(cache_dir) / f"basis-{manifold.fingerprint()[:16]}-L{float(L)!r}.npz"


def save_basis(path, basis):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"bandwidth": basis.bandwidth, "fingerprint": basis.manifold.fingerprint(), "backend": basis.manifold.backend}
    np.savez(
        path,
        meta=np.array(json.dumps(meta)),
        eigenvalues=basis.eigenvalues,
        values=basis.values,
        labels=basis.labels if basis.labels is not None else np.zeros((0, 0)),
    )


def load_basis(path, manifold):
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta["fingerprint"] != manifold.fingerprint():
            raise UsageError(f"{path}: cached basis belongs to a different manifold")
        lam = data["eigenvalues"]
        values = data["values"]
        labels = data["labels"]
    L = meta["bandwidth"]
    if isinstance(manifold, Sphere):
        modes = _SphereModes(sphharm.max_degree(L))
    elif isinstance(manifold, Torus):
        modes = _TorusModes(manifold, L)
    else:
        modes = _MeshModes(manifold, values)
    return EigenBasis(manifold, L, lam, labels if labels.size else None, modes, values)


__all__ = ["EigenBasis", "build_basis", "mesh_laplacian", "weyl_defect", "sigma", "weyl_main_term",
           "save_basis", "load_basis", "MeshPoints"]
