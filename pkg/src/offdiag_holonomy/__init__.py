"""Off-diagonal non-Abelian holonomies for noncyclic evolutions of subspaces."""

from .holonomy import (
    HOLONOMY_TOL,
    GammaKernel,
    HolonomyError,
    HolonomyResult,
    SigmaTable,
    build_sigma_table,
    enumerate_strict_sequences,
    gamma_kernel_projector,
    gamma_kernel_transport,
    gamma_product,
    holonomy_of_order,
    nonzero_existence_check,
    rank_budget_report,
    sigma,
)
from .models import TRIPOD_LABELS, TripodPath, tripod_curve, tripod_oracle
from .numkernel import KernelError, RankTolerance, is_unitary, numerical_rank, phi_map, svd
from .subspaces import (
    CurveError,
    CurveFamily,
    Decomposition,
    GaugeTransform,
    apply_gauge,
    from_hamiltonian_path,
    projector,
    refine,
)

__version__ = "0.1.0"
