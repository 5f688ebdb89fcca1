"""Carleson-measure diagnostics.

The Carleson constant of mu_L is the sharp constant C in
int |f|^2 dmu_L <= C ||f||_2^2 over E_L, i.e. the largest eigenvalue of the
measure Gram matrix A[i, j] = int phi_i phi_j dmu_L.  The geometric side is the
ball density sup_xi mu_L(B(xi, c/sqrt L)) / vol(B(xi, c/sqrt L)).
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ResolutionError, UsageError
from .manifold import concat_points, take_points


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    points: object = field(repr=False)
    masses: np.ndarray
    kind = "atomic"

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float)
        if m.ndim != 1 or len(m) != len(self.points):
            raise UsageError("one mass per atom required")
        if np.any(m < 0) or not np.all(np.isfinite(m)):
            raise UsageError("atom masses must be finite and nonnegative")
        object.__setattr__(self, "masses", m)

    def scaled(self, c):
        return AtomicMeasure(self.points, self.masses * c)

    @property
    def total_mass(self):
        return float(self.masses.sum())


@dataclass(frozen=True, eq=False)
class DensityMeasure:
    """Density against dV, one value per quadrature node; ``kind`` is
    "indicator" when the density is the 0/1 indicator of a node subset."""

    density: np.ndarray
    kind: str = "density"

    def __post_init__(self):
        d = np.asarray(self.density, dtype=float)
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise UsageError("densities must be finite and nonnegative")
        object.__setattr__(self, "density", d)

    def scaled(self, c):
        return DensityMeasure(self.density * c)


def volume_measure(manifold, scale=1.0):
    return DensityMeasure(np.full(len(manifold), float(scale)))


def indicator_measure(manifold, mask):
    mask = np.asarray(mask)
    if mask.dtype != bool:
        m = np.zeros(len(manifold), dtype=bool)
        m[mask] = True
        mask = m
    return DensityMeasure(mask.astype(float), kind="indicator")


def single_atom(manifold, point, mass=1.0):
    return AtomicMeasure(manifold.as_points(point), np.array([float(mass)]))


def sampling_measure(points, k):
    """(1/k_L) sum_j delta_{z_j}."""
    return AtomicMeasure(points, np.full(len(points), 1.0 / k))


@dataclass
class MeasureSequence:
    """Measures indexed by bandwidth L."""

    kind: str
    measures: dict

    def __getitem__(self, L):
        return self.measures[L]

    def __iter__(self):
        return iter(sorted(self.measures))


def measure_gram(mu, basis):
    if isinstance(mu, AtomicMeasure):
        if len(mu.masses) == 0:
            return np.zeros((basis.k, basis.k))
        V = basis.evaluate(mu.points)
        A = (V * mu.masses) @ V.T
    elif isinstance(mu, DensityMeasure):
        if mu.density.shape != (len(basis.manifold),):
            raise UsageError("density needs one value per quadrature node")
        V = basis.values
        A = (V * (basis.manifold.weights * mu.density)) @ V.T
    else:
        raise UsageError(f"unknown measure type {type(mu).__name__}")
    return 0.5 * (A + A.T)


def _lambda_max(A):
    if A.shape[0] == 0:
        return 0.0
    n = A.shape[0]
    return float(scipy.linalg.eigh(A, eigvals_only=True, subset_by_index=(n - 1, n - 1))[0])


def carleson_constant(mu, basis):
    """sup over f in E_L \\ {0} of int |f|^2 dmu / int |f|^2 dV."""
    return max(_lambda_max(measure_gram(mu, basis)), 0.0)


def ball_density(mu, basis, c=1.0):
    """Per-center ratios mu(B)/vol(B) at radius c/sqrt(L) and the centers used.

    Centers: quadrature nodes, plus the atoms of an atomic measure.  Atomic
    measures are compared against exact ball volumes; densities against the
    node mass of the same ball, so that dV itself gives exactly 1.
    """
    M = basis.manifold
    radius = c / math.sqrt(basis.bandwidth)
    if radius >= M.diameter * 2:
        raise UsageError("c/sqrt(L) must stay below the manifold diameter")
    w = M.weights
    if isinstance(mu, AtomicMeasure):
        if len(mu.masses) == 0:
            return np.zeros(len(M)), M.nodes
        centers = concat_points(M, M.nodes, mu.points)
        num = M.ball_sums(centers, mu.points, mu.masses, radius)
        if M.backend == "mesh":
            vol = M.ball_sums(centers, M.nodes, w, radius)
            if np.any(vol == 0):
                raise ResolutionError(f"radius {radius:.3g} holds no vertex; minimum resolvable radius "
                                      f"is {M.node_spacing:.3g}")
        else:
            # analytic backends are homogeneous: one closed-form volume for every center
            vol = M.ball_volume(take_points(centers, [0])[0], radius)
        return num / vol, centers
    M.require_resolvable(radius)
    num = M.ball_sums(M.nodes, M.nodes, w * mu.density, radius)
    vol = M.ball_sums(M.nodes, M.nodes, w, radius)
    return num / vol, M.nodes


def ball_density_sup(mu, basis, c=1.0):
    ratios, _ = ball_density(mu, basis, c)
    return float(ratios.max())


@dataclass
class SweepResult:
    rows: list
    summary: dict


def equivalence_sweep(family, bases, c=1.0):
    """Both Carleson functionals for every (measure, L) cell.

    ``family(basis)`` yields (measure_id, measure) pairs; ``bases`` maps L to
    an EigenBasis.  Needs at least two bandwidths.
    """
    if len(bases) < 2:
        raise UsageError("an equivalence sweep needs at least two values of L")
    rows = []
    for L in sorted(bases):
        basis = bases[L]
        for mid, mu in family(basis):
            bd = ball_density_sup(mu, basis, c)
            cc = carleson_constant(mu, basis)
            rows.append({"measure_id": str(mid), "L": float(L), "ball_density_sup": bd,
                         "carleson_constant": cc, "ratio": cc / bd if bd > 0 else math.nan})
    rows.sort(key=lambda r: (r["measure_id"], r["L"]))
    ratios = np.array([r["ratio"] for r in rows if np.isfinite(r["ratio"])])
    summary = {
        "cells": len(rows),
        "c": c,
        "ratio_min": float(ratios.min()) if len(ratios) else math.nan,
        "ratio_max": float(ratios.max()) if len(ratios) else math.nan,
    }
    summary["bracket"] = summary["ratio_max"] / summary["ratio_min"] if len(ratios) else math.nan
    return SweepResult(rows, summary)


def loglog_slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def radius_robustness(mu_by_L, bases, c_small=0.25, c_large=1.0):
    """max over L of ball_density_sup(c_large) / ball_density_sup(c_small) and its inverse."""
    out = []
    for L in sorted(bases):
        a = ball_density_sup(mu_by_L[L], bases[L], c_small)
        b = ball_density_sup(mu_by_L[L], bases[L], c_large)
        out.append(max(a / b, b / a))
    return float(max(out))


# --- separated families and the Plancherel-Polya bound ---

@dataclass
class PointFamily:
    """Point lists Z_L indexed by bandwidth, with the separation parameter delta."""

    points: dict
    delta: float = 1.0

    def __getitem__(self, L):
        return self.points[L]


def separation_check(points, basis, delta):
    """True iff every pair is at distance >= delta/sqrt(L); also the violating pairs."""
    if delta <= 0:
        raise UsageError("delta must be positive")
    if len(points) < 2:
        return True, []
    pairs = basis.manifold.close_pairs(points, delta / math.sqrt(basis.bandwidth))
    return len(pairs) == 0, [tuple(map(int, p)) for p in pairs]


def _first_fit_colors(n, pairs):
    nbrs = [[] for _ in range(n)]
    for i, j in pairs:
        nbrs[max(i, j)].append(min(i, j))
    color = np.empty(n, dtype=np.int64)
    for j in range(n):
        used = {int(color[i]) for i in nbrs[j]}
        c = 0
        while c in used:
            c += 1
        color[j] = c
    return color


def greedy_separated_partition(points, basis, delta):
    """First-fit split into delta/sqrt(L)-separated subfamilies, in input order.

    Returns a list of index arrays into ``points``.
    """
    if delta <= 0:
        raise UsageError("delta must be positive")
    n = len(points)
    if n == 0:
        return []
    pairs = basis.manifold.close_pairs(points, delta / math.sqrt(basis.bandwidth))
    color = _first_fit_colors(n, pairs)
    return [np.flatnonzero(color == c) for c in range(int(color.max()) + 1)]


def greedy_net(manifold, candidates, separation):
    """Indices of a maximal separated subset of ``candidates``, greedy in input order."""
    n = len(candidates)
    pairs = manifold.close_pairs(candidates, separation)
    nbrs = [[] for _ in range(n)]
    for i, j in pairs:
        nbrs[j].append(i)
        nbrs[i].append(j)
    taken = np.zeros(n, dtype=bool)
    blocked = np.zeros(n, dtype=bool)
    for j in range(n):
        if not blocked[j]:
            taken[j] = True
            blocked[nbrs[j]] = True
    return np.flatnonzero(taken)


def separated_net(manifold, L, delta, seed, oversample=8.0):
    """Greedy delta/sqrt(L)-net over seeded uniform candidates (about
    ``oversample`` candidates per ball of radius delta/sqrt(L))."""
    sep = delta / math.sqrt(L)
    count = int(math.ceil(oversample * manifold.volume / (math.pi * sep * sep))) + 1
    cand = manifold.sample_points(count, seed)
    return take_points(cand, greedy_net(manifold, cand, sep))


def bessel_bound(points, basis):
    """Largest eigenvalue of (1/k_L) sum_j v_j v_j^T, v_j the eigenfunction values at z_j;
    the same matrix as the Carleson constant of (1/k_L) sum_j delta_{z_j}."""
    if len(points) == 0:
        return 0.0
    return carleson_constant(sampling_measure(points, basis.k), basis)


def max_ball_multiplicity(points, basis, delta):
    """Largest number of points in one ball of radius delta/(2 sqrt L) centered at a point."""
    M = basis.manifold
    if len(points) == 0:
        return 0
    counts = M.ball_sums(points, points, np.ones(len(points)), delta / (2.0 * math.sqrt(basis.bandwidth)))
    return int(counts.max())
