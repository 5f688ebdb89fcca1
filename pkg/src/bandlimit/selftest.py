"""Invariant suite run by ``bandlimit selftest``.

Each check returns a Check; the suite passes when every check does.  Mesh
tolerances are looser because the discrete spectrum is only an approximation
of the smooth one, although every identity below is exact for it too.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import bandlimited as bl
from . import carleson as cs
from . import extension as ex
from . import logvinenko as lv


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float


def _within(name, value, tol):
    return Check(name, bool(abs(value) <= tol), float(value), float(tol))


def run_checks(basis, seed=0, samples=20):
    """Run the invariant suite on one basis; returns a list of Check."""
    M = basis.manifold
    mesh = M.backend == "mesh"
    tight, loose = (1e-8, 1e-5) if mesh else (1e-10, 1e-9)
    rng = np.random.default_rng(seed)
    out = []

    out.append(_within("gram_orthonormality", np.abs(basis.gram() - np.eye(basis.k)).max(), tight))
    f = bl.random_function(basis, rng)
    z = M.sample_points(samples, seed)
    out.append(_within("reproducing_identity", bl.reproducing_error(f, z), loose))

    xi = M.sample_points(1, seed + 1)
    k0 = bl.reproducing_kernel(basis, xi).values
    s0 = bl.riesz_kernel(basis, xi, 0).values
    out.append(Check("riesz_order0_is_kernel", bool(np.array_equal(k0, s0)), 0.0, 0.0))
    N = bl.default_order(M.dimension)
    margin = bl.riesz_diagonal_margin(basis, N)
    out.append(Check("riesz_diagonal_lower_bound", margin >= -tight, margin, tight))

    C = rng.standard_normal((samples, basis.k))
    worst = 0.0
    for r in (0.25, 0.5, 1.0):
        q = ex.slab_norm_ratios(basis, C, r)
        worst = max(worst, float(np.max(np.maximum(math.exp(-2 * r) - q, q - math.exp(2 * r)))))
    out.append(Check("slab_ratio_bounds", worst <= 0.0, worst, 0.0))
    const = bl.BandlimitedFunction(basis, np.eye(basis.k)[0])
    out.append(_within("slab_ratio_constant", ex.slab_norm_ratio(const, 0.5) - 1.0, 0.0))
    lhs, rhs = ex.grad_l2_identity(f)
    out.append(_within("grad_l2_identity", (lhs - rhs) / rhs, 1e-8))
    top = np.zeros(basis.k)
    top[-1] = 1.0
    ft = bl.BandlimitedFunction(basis, top)
    bern = float(np.dot(basis.eigenvalues, f.coefficients ** 2)) - basis.bandwidth * f.norm ** 2
    out.append(Check("l2_bernstein_inequality", bern <= 1e-12 * basis.bandwidth, bern, 0.0))
    out.append(_within("l2_bernstein_witness",
                       ex.grad_l2_identity(ft)[1] - float(basis.eigenvalues[-1]), 1e-12 * basis.bandwidth))

    dV = cs.volume_measure(M)
    out.append(_within("carleson_volume", cs.carleson_constant(dV, basis) - 1.0, tight))
    atom = cs.AtomicMeasure(xi, np.array([0.7]))
    rank_one = 0.7 * float(basis.kernel_diagonal(xi)[0])
    out.append(_within("carleson_rank_one", cs.carleson_constant(atom, basis) / rank_one - 1.0, 1e-10))
    mu = cs.AtomicMeasure(z, rng.random(len(z)))
    c1 = cs.carleson_constant(mu, basis)
    out.append(_within("carleson_homogeneity", cs.carleson_constant(mu.scaled(3.0), basis) / (3.0 * c1) - 1.0,
                       1e-12))
    out.append(Check("bessel_equals_carleson",
                     cs.bessel_bound(z, basis) == cs.carleson_constant(cs.sampling_measure(z, basis.k), basis),
                     0.0, 0.0))

    region = lv.Cap(xi, 0.5 * M.injectivity_radius)
    mask = lv.node_mask(region, M)
    G = lv.set_gram(mask, basis) + lv.set_gram(~mask, basis)
    out.append(_within("complement_identity", np.abs(G - np.eye(basis.k)).max(), 1e-8 if mesh else 1e-12))
    out.append(_within("ls_whole", lv.ls_constant(lv.Whole(), basis) - 1.0, tight))
    out.append(_within("ls_empty", lv.ls_constant(lv.Empty(), basis), 0.0))
    return out
