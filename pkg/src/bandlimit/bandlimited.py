"""The space E_L: synthesis and projection, the reproducing and Riesz kernels,
plus unit-norm test functions concentrated at a point."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, UsageError
from .spectrum import sigma


@dataclass(frozen=True, eq=False)
class BandlimitedFunction:
    basis: object = field(repr=False)
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float)
        if c.shape != (self.basis.k,):
            raise UsageError(f"expected {self.basis.k} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coefficients", c)

    @property
    def norm(self):
        return float(np.linalg.norm(self.coefficients))

    @property
    def node_values(self):
        return self.coefficients @ self.basis.values

    def __call__(self, points):
        return self.coefficients @ self.basis.evaluate(points)

    def __mul__(self, s):
        return BandlimitedFunction(self.basis, self.coefficients * s)

    __rmul__ = __mul__

    def __add__(self, other):
        if other.basis is not self.basis:
            raise UsageError("functions live on different bases")
        return BandlimitedFunction(self.basis, self.coefficients + other.coefficients)


def evaluate(f, z):
    """f(z) at one point (float) or many (array)."""
    out = f(z)
    return float(out[0]) if np.ndim(z) == 1 or _single_mesh_point(z) else out


def _single_mesh_point(z):
    return hasattr(z, "tri") and len(z) == 1


def project(basis, samples):
    """Orthogonal projection of node samples onto E_L: beta_i = sum_k w_k f(x_k) phi_i(x_k)."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (len(basis.manifold),):
        raise UsageError(f"expected {len(basis.manifold)} node values, got shape {samples.shape}")
    return BandlimitedFunction(basis, basis.values @ (basis.manifold.weights * samples))


def random_function(basis, rng, normalize=True):
    c = rng.standard_normal(basis.k)
    if normalize:
        c /= np.linalg.norm(c)
    return BandlimitedFunction(basis, c)


def l2_norm_squared(f):
    """Quadrature value of the squared L^2 norm (compare with sum of beta^2)."""
    return float(np.dot(f.basis.manifold.weights, f.node_values ** 2))


@dataclass(frozen=True, eq=False)
class KernelField:
    """A kernel with one argument frozen at ``anchor``; ``order`` 0 is K_L itself."""

    kind: str
    order: int
    anchor: object = field(repr=False)
    function: BandlimitedFunction = field(repr=False)

    @property
    def values(self):
        return self.function.node_values


def riesz_weights(eigenvalues, L, N):
    """(1 - lambda/L)^N, clipped into [0, 1]."""
    return np.clip(1.0 - np.asarray(eigenvalues) / L, 0.0, 1.0) ** N


def _anchor_column(basis, xi):
    v = basis.evaluate(xi)
    if v.shape[1] != 1:
        raise UsageError("kernel anchor must be a single point")
    return v[:, 0]


def riesz_kernel(basis, xi, N):
    """S^N_L(., xi) = sum_i (1 - lambda_i/L)^N phi_i(.) phi_i(xi)."""
    if N < 0 or int(N) != N:
        raise PreconditionError("Riesz order must be a nonnegative integer")
    w = riesz_weights(basis.eigenvalues, basis.bandwidth, int(N))
    coeffs = w * _anchor_column(basis, xi)
    kind = "reproducing" if N == 0 else "riesz"
    return KernelField(kind, int(N), xi, BandlimitedFunction(basis, coeffs))


def reproducing_kernel(basis, xi):
    return riesz_kernel(basis, xi, 0)


def kernel_matrix(basis, points_a=None, points_b=None):
    """K_L(a_i, b_j); exactly symmetric when both point sets coincide."""
    A = basis.values if points_a is None else basis.evaluate(points_a)
    if points_b is None and points_a is None or points_b is points_a:
        K = A.T @ A
        return 0.5 * (K + K.T)
    B = basis.values if points_b is None else basis.evaluate(points_b)
    return A.T @ B


def kernel_diagonal_defect(basis):
    """max over nodes of |K_L(z,z) / (sigma_m/(2 pi)^m L^{m/2}) - 1|."""
    m = basis.manifold.dimension
    main = sigma(m) / (2.0 * math.pi) ** m * basis.bandwidth ** (m / 2.0)
    diag = basis.kernel_diagonal()
    return float(np.max(np.abs(diag / main - 1.0)))


def default_order(m):
    return m // 2 + 1


def concentrated_function(basis, xi, N=None):
    """S^N_L(., xi) normalized to unit L^2 norm; requires N + 1 > m/2."""
    m = basis.manifold.dimension
    N = default_order(m) if N is None else int(N)
    if not N + 1 > m / 2.0:
        raise PreconditionError(f"Riesz order N={N} too small for dimension {m}: need N + 1 > m/2")
    f = riesz_kernel(basis, xi, N).function
    return f * (1.0 / f.norm)


def tail_mass(f, xi, R):
    """Integral of |f|^2 outside B(xi, R / sqrt(L)) for a unit-norm f."""
    if abs(f.norm - 1.0) > 1e-8:
        raise PreconditionError(f"tail_mass expects a unit-norm function, got norm {f.norm:.6g}")
    if R <= 0:
        raise UsageError("R must be positive")
    M = f.basis.manifold
    radius = R / math.sqrt(f.basis.bandwidth)
    if radius >= M.diameter:
        return 0.0
    total = l2_norm_squared(f)
    pts, w = M.ball_quadrature(xi, radius, f.basis.bandwidth)
    inside = float(np.dot(w, f(pts) ** 2))
    return float(min(max(total - inside, 0.0), 1.0))


def find_tail_radius(cases, epsilon, start=1.0, limit=1024.0):
    """Doubling search for R with tail_mass < epsilon in every (f, xi) case.

    Returns (R, worst tail at R).
    """
    R = float(start)
    while True:
        worst = max(tail_mass(f, xi, R) for f, xi in cases)
        if worst < epsilon:
            return R, worst
        if R >= limit:
            raise PreconditionError(f"no radius up to {limit} brings the tail below {epsilon}")
        R *= 2.0


def kernel_profile(basis, xi, N):
    """Distances from xi to every node and S^N_L(node, xi), sorted by distance."""
    kf = riesz_kernel(basis, xi, N)
    d = basis.manifold.node_distances(xi)
    order = np.argsort(d, kind="stable")
    return d[order], kf.values[order]


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    envelope_constant: float
    bins: int


def decay_slope(basis, xi, N, d_min_factor=5.0, d_max=None):
    """Log-log slope of the |S^N_L| envelope against 1 + sqrt(L) d.

    The kernel oscillates, so each bin of width pi/sqrt(L) (about one half
    period) contributes its maximum; the regression runs over those maxima,
    restricted to d in [d_min_factor/sqrt(L), d_max] (default R0/2).
    """
    L = basis.bandwidth
    m = basis.manifold.dimension
    rL = math.sqrt(L)
    d_max = basis.manifold.injectivity_radius / 2.0 if d_max is None else d_max
    d, s = kernel_profile(basis, xi, N)
    env_c = float(np.max(np.abs(s) / (L ** (m / 2.0) * (1.0 + rL * d) ** (-N - 1.0))))
    keep = (d >= d_min_factor / rL) & (d <= d_max)
    d, s = d[keep], np.abs(s[keep])
    width = math.pi / rL
    edges = np.arange(d_min_factor / rL, d_max + width, width)
    xs, ys = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (d >= lo) & (d < hi)
        if np.any(sel):
            j = np.argmax(s[sel])
            xs.append(math.log1p(rL * d[sel][j]))
            ys.append(math.log(s[sel][j]))
    if len(xs) < 2:
        raise UsageError("too few nodes in the fitting range")
    slope, intercept = np.polyfit(xs, ys, 1)
    return DecayFit(float(slope), float(intercept), env_c, len(xs))


def riesz_diagonal(basis, N, L=None):
    """S^N_L(z, z) at every node; ``L`` below the basis bandwidth truncates first."""
    L = basis.bandwidth if L is None else L
    w = riesz_weights(basis.eigenvalues, L, int(N)) * (basis.eigenvalues <= L)
    return w @ basis.values ** 2


def riesz_diagonal_margin(basis, N):
    """min over nodes of S^N_L(z,z) - 2^{-N} K_{L/2}(z,z); nonnegative when the lower bound holds."""
    half = riesz_diagonal(basis, 0, basis.bandwidth / 2.0)
    return float(np.min(riesz_diagonal(basis, N) - 2.0 ** (-int(N)) * half))


def reproducing_error(f, z):
    """max |f(z) - int f(y) K_L(y, z) dV(y)| with the integral done by node quadrature."""
    basis = f.basis
    K = basis.values.T @ basis.evaluate(z)
    via_kernel = (basis.manifold.weights * f.node_values) @ K
    return float(np.max(np.abs(f(z) - via_kernel)))
