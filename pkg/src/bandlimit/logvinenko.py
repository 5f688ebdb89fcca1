"""Logvinenko-Sereda diagnostics.

A set A_L is discretized as the quadrature nodes it contains.  Its L-S
constant is the largest gamma with int_A |f|^2 >= gamma ||f||_2^2 on E_L,
i.e. the smallest eigenvalue of the set-restricted Gram matrix; the geometric
side is the relative density inf_z vol(A ∩ B(z, r/sqrt L)) / vol(B(z, r/sqrt L)).
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.stats

from .bandlimited import concentrated_function
from .carleson import DensityMeasure, carleson_constant, measure_gram
from .errors import UsageError
from .manifold import point_from_json, points_from_json, take_points


class Region:
    """A subset of M, evaluated at the quadrature nodes by ``mask``."""

    def mask(self, manifold):
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Cap(Region):
    center: object
    radius: float

    def mask(self, manifold):
        return manifold.node_distances(manifold.as_points(self.center)[0]) < self.radius


@dataclass(frozen=True)
class Band(Region):
    """Points within ``half_width`` of the great circle orthogonal to ``axis``
    (sphere, or a mesh of the sphere), or of the line y = ``offset`` (torus)."""

    half_width: float
    axis: tuple = (0.0, 0.0, 1.0)
    offset: float = 0.0

    def mask(self, manifold):
        if manifold.backend == "torus":
            y = manifold.nodes[:, 1] - self.offset
            y = (y + manifold.side_y / 2.0) % manifold.side_y - manifold.side_y / 2.0
            return np.abs(y) < self.half_width
        pos = manifold.vertices if manifold.backend == "mesh" else manifold.nodes
        axis = np.asarray(self.axis, dtype=float)
        axis = axis / np.linalg.norm(axis)
        s = (pos @ axis) / np.linalg.norm(pos, axis=1)
        return np.abs(np.arcsin(np.clip(s, -1.0, 1.0))) < self.half_width


@dataclass(frozen=True, eq=False)
class Hemisphere(Region):
    """{x : <x, axis> > 0} on the sphere or a mesh of it."""

    axis: tuple = (0.0, 0.0, 1.0)

    def mask(self, manifold):
        pos = manifold.vertices if manifold.backend == "mesh" else manifold.nodes
        return pos @ np.asarray(self.axis, dtype=float) > 0


@dataclass(frozen=True, eq=False)
class NodeSet(Region):
    ids: np.ndarray

    def mask(self, manifold):
        m = np.zeros(len(manifold), dtype=bool)
        ids = np.asarray(self.ids, dtype=np.int64)
        if len(ids) and (ids.min() < 0 or ids.max() >= len(manifold)):
            raise UsageError("node id out of range")
        m[ids] = True
        return m


@dataclass(frozen=True, eq=False)
class NetCaps(Region):
    """Union of caps of one radius around every point of ``points``."""

    points: object
    radius: float

    def mask(self, manifold):
        m = np.zeros(len(manifold), dtype=bool)
        pts = manifold.as_points(self.points)
        for j in range(len(pts)):
            m[manifold.ball(take_points(pts, [j]), self.radius).indices] = True
        return m


@dataclass(frozen=True, eq=False)
class Union(Region):
    members: tuple

    def mask(self, manifold):
        m = np.zeros(len(manifold), dtype=bool)
        for r in self.members:
            m |= node_mask(r, manifold)
        return m


@dataclass(frozen=True, eq=False)
class Complement(Region):
    member: Region

    def mask(self, manifold):
        return ~node_mask(self.member, manifold)


@dataclass(frozen=True)
class Whole(Region):
    def mask(self, manifold):
        return np.ones(len(manifold), dtype=bool)


@dataclass(frozen=True)
class Empty(Region):
    def mask(self, manifold):
        return np.zeros(len(manifold), dtype=bool)


def node_mask(region, manifold):
    """Boolean node mask of a Region, or a mask passed through after a shape check."""
    if isinstance(region, Region):
        m = region.mask(manifold)
    else:
        m = np.asarray(region)
    if m.dtype != bool or m.shape != (len(manifold),):
        raise UsageError("a set must be a Region or a boolean mask over the quadrature nodes")
    return m


def region_from_json(obj, manifold, L):
    """Build a Region from a JSON predicate.  Radii and half-widths carrying
    "scale": "sqrt_L" are divided by sqrt(L)."""
    kind = obj.get("kind")
    scale = 1.0 / math.sqrt(L) if obj.get("scale") == "sqrt_L" else 1.0
    if kind == "cap":
        return Cap(point_from_json(manifold, obj["center"]), float(obj["radius"]) * scale)
    if kind == "band":
        return Band(float(obj["half_width"]) * scale, tuple(obj.get("axis", (0.0, 0.0, 1.0))),
                    float(obj.get("offset", 0.0)))
    if kind == "hemisphere":
        return Hemisphere(tuple(obj.get("axis", (0.0, 0.0, 1.0))))
    if kind == "nodes":
        return NodeSet(np.asarray(obj["ids"], dtype=np.int64))
    if kind == "net_caps":
        return NetCaps(points_from_json(manifold, obj["points"]), float(obj["radius"]) * scale)
    if kind == "union":
        return Union(tuple(region_from_json(m, manifold, L) for m in obj["members"]))
    if kind == "complement":
        return Complement(region_from_json(obj["of"], manifold, L))
    if kind == "whole":
        return Whole()
    if kind == "empty":
        return Empty()
    raise UsageError(f"unknown set kind {kind!r}")


def set_gram(region, basis):
    """G[i, j] = sum over nodes in A of w_k phi_i(x_k) phi_j(x_k); the Gram matrix
    of the indicator measure of A, assembled by the Carleson module."""
    mask = node_mask(region, basis.manifold)
    return measure_gram(DensityMeasure(mask.astype(float), kind="indicator"), basis)


def ls_constant(region, basis):
    """inf over f in E_L \\ {0} of int_A |f|^2 / ||f||^2, clipped into [0, 1]."""
    G = set_gram(region, basis)
    lo = float(scipy.linalg.eigh(G, eigvals_only=True, subset_by_index=(0, 0))[0])
    return min(max(lo, 0.0), 1.0)


def complement_ls_constant(region, basis):
    """1 - carleson_constant of the complement indicator; equals ls_constant up to rounding."""
    mask = node_mask(region, basis.manifold)
    return 1.0 - carleson_constant(DensityMeasure((~mask).astype(float), kind="indicator"), basis)


def relative_density(region, basis, r):
    """min over node centers z of mass(A ∩ B(z, rho)) / mass(B(z, rho)), rho = r/sqrt(L)."""
    if r <= 0:
        raise UsageError("r must be positive")
    M = basis.manifold
    mask = node_mask(region, M)
    rho = r / math.sqrt(basis.bandwidth)
    M.require_resolvable(rho)
    if not mask.any():
        return 0.0
    w = M.weights
    inside = M.ball_sums(M.nodes, M.nodes, np.where(mask, w, 0.0), rho)
    total = M.ball_sums(M.nodes, M.nodes, w, rho)
    return float(np.clip(inside / total, 0.0, 1.0).min())


@dataclass
class LSSweep:
    rows: list
    summary: dict


def ls_equivalence_sweep(family, bases, r):
    """relative_density and ls_constant for every (set, L) cell.

    ``family(basis)`` yields (set_id, region) pairs.  The summary carries rank
    association between the two functionals and, per set, the spread of the
    L-S constant over L (the divergence witness for degenerate families).
    """
    if len(bases) < 2:
        raise UsageError("an equivalence sweep needs at least two values of L")
    rows = []
    for L in sorted(bases):
        basis = bases[L]
        for sid, region in family(basis):
            rows.append({"set_id": str(sid), "L": float(L), "r": float(r),
                         "relative_density": relative_density(region, basis, r),
                         "ls_constant": ls_constant(region, basis)})
    rows.sort(key=lambda x: (x["set_id"], x["L"]))
    dens = np.array([x["relative_density"] for x in rows])
    ls = np.array([x["ls_constant"] for x in rows])
    summary = {"cells": len(rows), "r": float(r)}
    if len(rows) > 2 and np.ptp(dens) > 0 and np.ptp(ls) > 0:
        summary["spearman"] = float(scipy.stats.spearmanr(dens, ls).statistic)
        summary["kendall"] = float(scipy.stats.kendalltau(dens, ls).statistic)
    else:
        summary["spearman"] = summary["kendall"] = math.nan
    per_set = {}
    for x in rows:
        per_set.setdefault(x["set_id"], []).append(x["ls_constant"])
    summary["ls_min_by_set"] = {k: float(min(v)) for k, v in sorted(per_set.items())}
    summary["ls_spread_by_set"] = {k: (float(max(v) / min(v)) if min(v) > 0 else math.inf)
                                   for k, v in sorted(per_set.items())}
    return LSSweep(rows, summary)


@dataclass(frozen=True)
class ConcentrationWitness:
    """``value`` is the empirical C_1; None with ``tail_only`` set when A misses the ball."""

    value: object
    integral: float
    volume_fraction: float
    tail_only: bool
    ok: bool = field(default=True)


def concentration_witness(region, basis, xi, N, epsilon, R0):
    """(int_A |f|^2 - eps) * vol(B) / vol(A ∩ B) for the concentrated f at xi,
    B = B(xi, R0/sqrt L).  An empty A ∩ B gives the tail-only flag, which is
    ``ok`` when int_A |f|^2 <= 1.5 eps."""
    M = basis.manifold
    mask = node_mask(region, M)
    f = concentrated_function(basis, xi, N)
    w = M.weights
    integral = float(np.dot(w[mask], f.node_values[mask] ** 2))
    ball = np.zeros(len(M), dtype=bool)
    ball[M.ball(xi, R0 / math.sqrt(basis.bandwidth)).indices] = True
    vb = float(w[ball].sum())
    vab = float(w[ball & mask].sum())
    if vab == 0.0:
        return ConcentrationWitness(None, integral, 0.0, True, integral <= 1.5 * epsilon)
    return ConcentrationWitness((integral - epsilon) * vb / vab, integral, vab / vb, False, True)
