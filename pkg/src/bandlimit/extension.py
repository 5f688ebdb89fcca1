"""Harmonic extension h(z, t) = sum_i beta_i phi_i(z) exp(sqrt(lambda_i) t) to M x R
and the Bernstein-type gradient diagnostics built on it.

Every t-integral is done in closed form: int_{-a}^{a} e^{ct} dt = 2 sinh(ca)/c.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bandlimited import BandlimitedFunction
from .errors import PreconditionError, ResolutionError, UndefinedRatioError


def sinhc(x):
    """sinh(x)/x with the removable singularity filled in."""
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    nz = x != 0
    out[nz] = np.sinh(x[nz]) / x[nz]
    return out


@dataclass(frozen=True, eq=False)
class HarmonicExtension:
    source: BandlimitedFunction

    @property
    def rates(self):
        return np.sqrt(np.clip(self.source.basis.eigenvalues, 0.0, None))

    def coefficients_at(self, t):
        return self.source.coefficients * np.exp(self.rates * t)

    def __call__(self, points, t):
        return self.coefficients_at(t) @ self.source.basis.evaluate(points)

    def node_values(self, t):
        return self.coefficients_at(t) @ self.source.basis.values

    def slab_half_width(self, r):
        return r / math.sqrt(self.source.basis.bandwidth)


def extend(f):
    return HarmonicExtension(f)


def slab_gram(eigenvalues, half_width):
    """G[i, j] = int_{-a}^{a} exp((sqrt(l_i) + sqrt(l_j)) t) dt."""
    s = np.sqrt(np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None))
    c = s[:, None] + s[None, :]
    return 2.0 * half_width * sinhc(c * half_width)


def slab_norm_ratio(f, r):
    """sqrt(L) ||h||^2_{M x I_r} / (2r ||f||^2); lies in [e^{-2r}, e^{2r}]."""
    if r <= 0:
        raise PreconditionError("slab radius r must be positive")
    beta2 = f.coefficients ** 2
    total = beta2.sum()
    if total == 0.0:
        raise UndefinedRatioError("ratio undefined for the zero function")
    a = r / math.sqrt(f.basis.bandwidth)
    s = np.sqrt(np.clip(f.basis.eigenvalues, 0.0, None))
    # per coefficient: sqrt(L) * 2 sinh(2 s a)/(2 s) / (2r) = sinhc(2 s a)
    return float(np.dot(beta2, sinhc(2.0 * s * a)) / total)


def slab_norm_ratios(basis, coefficients, r):
    """Vectorized slab_norm_ratio over rows of ``coefficients``."""
    a = r / math.sqrt(basis.bandwidth)
    s = np.sqrt(np.clip(basis.eigenvalues, 0.0, None))
    beta2 = np.asarray(coefficients) ** 2
    return (beta2 @ sinhc(2.0 * s * a)) / beta2.sum(axis=1)


def node_gradient(f):
    """(n_nodes, c) gradient of f at the quadrature nodes."""
    return np.einsum("i,inc->nc", f.coefficients, f.basis.gradient_values)


def grad_l2_identity(f):
    """(lhs, rhs): quadrature value of ||grad f||^2 and sum_i lambda_i beta_i^2.

    Meshes integrate the per-face constant gradients of the piecewise linear
    interpolant, which is the quadrature that is exact for them.
    """
    basis = f.basis
    rhs = float(np.dot(basis.eigenvalues, f.coefficients ** 2))
    if basis.manifold.backend == "mesh":
        g = np.einsum("i,ifc->fc", f.coefficients, basis.face_gradients)
        lhs = float(np.dot(basis.manifold.areas, np.einsum("fc,fc->f", g, g)))
    else:
        g = node_gradient(f)
        lhs = float(np.dot(basis.manifold.weights, np.einsum("nc,nc->n", g, g)))
    return lhs, rhs


def bernstein_ratio_single(basis, i):
    """max |grad phi_i| / (sqrt(lambda_i) max |phi_i|) over the nodes."""
    lam = float(basis.eigenvalues[i])
    if lam <= 0:
        raise PreconditionError("ratio undefined for the constant eigenfunction")
    g = basis.gradient_values[i]
    return float(np.sqrt((g * g).sum(axis=1)).max() / (math.sqrt(lam) * np.abs(basis.values[i]).max()))


def bernstein_ratios_single(basis):
    """bernstein_ratio_single for every eigenfunction with lambda > 0."""
    lam = basis.eigenvalues
    idx = np.flatnonzero(lam > 0)
    gmax = np.sqrt((basis.gradient_values[idx] ** 2).sum(axis=2)).max(axis=1)
    vmax = np.abs(basis.values[idx]).max(axis=1)
    return idx, gmax / (np.sqrt(lam[idx]) * vmax)


def bernstein_ratio_space(f):
    """max-node |grad f| / (sqrt(k_L L) ||f||_2)."""
    if f.norm == 0.0:
        raise UndefinedRatioError("ratio undefined for the zero function")
    g = node_gradient(f)
    gmax = float(np.sqrt((g * g).sum(axis=1)).max())
    return gmax / (math.sqrt(f.basis.k * f.basis.bandwidth) * f.norm)


def gradient_conjecture_ratio(f):
    """Exploratory: max |grad f| / (sqrt(L) max |f|) over nodes; never asserted."""
    g = node_gradient(f)
    return float(np.sqrt((g * g).sum(axis=1)).max() / (math.sqrt(f.basis.bandwidth) * np.abs(f.node_values).max()))


def local_slab_energy(f, z, r):
    """int over B(z, r/sqrt(L)) x I_r of |h|^2, t-integrated in closed form."""
    basis = f.basis
    M = basis.manifold
    if not r < M.injectivity_radius:
        raise PreconditionError(f"r={r} must be below the injectivity radius {M.injectivity_radius:.4g}")
    a = r / math.sqrt(basis.bandwidth)
    pts, w = M.ball_quadrature(z, a, basis.bandwidth)
    if len(w) == 0:
        raise ResolutionError(f"ball of radius {a:.3g} holds no quadrature node; "
                              f"minimum resolvable radius is {M.node_spacing:.3g}")
    U = f.coefficients[:, None] * basis.evaluate(pts)
    G = slab_gram(basis.eigenvalues, a)
    return float(np.dot(w, np.einsum("ip,ip->p", U, G @ U)))


def submean_defect(f, z, r):
    """|f(z)|^2 / (L^{(m+1)/2} int_{B(z,r/sqrt L) x I_r} |h|^2): the empirical C_r witness."""
    m = f.basis.manifold.dimension
    L = f.basis.bandwidth
    val = float(f(z)[0])
    return val * val / (L ** ((m + 1) / 2.0) * local_slab_energy(f, z, r))


def gradient_submean_defect(f, z, r):
    """|grad f(z)|^2 / (L^{(m+3)/2} int_{B(z,r/sqrt L) x I_r} |h|^2)."""
    m = f.basis.manifold.dimension
    L = f.basis.bandwidth
    g = np.einsum("i,ipc->pc", f.coefficients, f.basis.evaluate_gradient(z))[0]
    return float(g @ g) / (L ** ((m + 3) / 2.0) * local_slab_energy(f, z, r))
