"""Bandlimited function spaces E_L on compact manifolds, with spectral bases
and kernels plus Carleson and Logvinenko-Sereda diagnostics."""

from .bandlimited import (
    BandlimitedFunction,
    concentrated_function,
    decay_slope,
    find_tail_radius,
    project,
    random_function,
    reproducing_kernel,
    riesz_kernel,
    tail_mass,
)
from .carleson import (
    AtomicMeasure,
    DensityMeasure,
    MeasureSequence,
    PointFamily,
    ball_density_sup,
    bessel_bound,
    carleson_constant,
    equivalence_sweep,
    greedy_net,
    greedy_separated_partition,
    measure_gram,
    separation_check,
)
from .errors import (
    BandlimitError,
    ConfigError,
    MeshError,
    PreconditionError,
    ResolutionError,
    SolverError,
    UsageError,
)
from .extension import HarmonicExtension, extend, grad_l2_identity, slab_norm_ratio
from .logvinenko import (
    Band,
    Cap,
    concentration_witness,
    ls_constant,
    ls_equivalence_sweep,
    relative_density,
    set_gram,
)
from .manifold import Sphere, Torus
from .mesh import Mesh
from .spectrum import EigenBasis, build_basis, weyl_defect

__version__ = "0.1.0"
