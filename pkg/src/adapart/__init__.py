"""Exact sampling of weighted permutations and matrix permanent estimation.

The permutation distribution ``p(perm) = prod_c A[perm[c], c] / per(A)`` of a
non-negative square matrix is sampled exactly by rejection from an
adaptively partitioned proposal built on the Soules permanent bound. The
accept/reject counts yield unbiased permanent estimates with confidence
intervals. A Rao-Blackwellized particle filter for multi-target tracking
uses the sampler as its optimal proposal.
"""

from .bounds import DeltaTable, SubsetBound, delta_table, soules_upper_bound, subset_upper_bound
from .errors import (
    AdaPartError,
    DeadParticleSet,
    DegenerateBootstrap,
    DimensionTooLarge,
    InvalidArgs,
    InvalidMatrix,
    MatrixFormatError,
    NotBlockDiagonal,
    RejectionCapExceeded,
    ZeroPermanent,
)
from .estimator import (
    EstimateReport,
    bound_improvement_ratio,
    clopper_pearson,
    estimate_fixed_bound,
    estimate_tightening,
)
from .exact import permanent_block_diagonal, permanent_brute_force, permanent_ryser
from .matrixio import (
    GeneratorKind,
    GeneratorSpec,
    as_matrix,
    block_diagonal_matrix,
    generate,
    read_matrix_market,
    uniform_matrix,
    write_matrix_market,
)
from .sampler import (
    DrawResult,
    PermutationSampler,
    PermutationSubset,
    TighteningCache,
    acceptance_rate_probe,
    build_nesting_partition,
    choose_refinement,
    draw_adapart,
    draw_fixed_partition,
    draw_guaranteed,
    refine,
)

__version__ = "0.1.0"

__all__ = [
    "AdaPartError",
    "DeadParticleSet",
    "DegenerateBootstrap",
    "DeltaTable",
    "DimensionTooLarge",
    "DrawResult",
    "EstimateReport",
    "GeneratorKind",
    "GeneratorSpec",
    "InvalidArgs",
    "InvalidMatrix",
    "MatrixFormatError",
    "NotBlockDiagonal",
    "PermutationSampler",
    "PermutationSubset",
    "RejectionCapExceeded",
    "SubsetBound",
    "TighteningCache",
    "ZeroPermanent",
    "acceptance_rate_probe",
    "as_matrix",
    "block_diagonal_matrix",
    "bound_improvement_ratio",
    "build_nesting_partition",
    "choose_refinement",
    "clopper_pearson",
    "delta_table",
    "draw_adapart",
    "draw_fixed_partition",
    "draw_guaranteed",
    "estimate_fixed_bound",
    "estimate_tightening",
    "generate",
    "permanent_block_diagonal",
    "permanent_brute_force",
    "permanent_ryser",
    "read_matrix_market",
    "refine",
    "soules_upper_bound",
    "subset_upper_bound",
    "uniform_matrix",
    "write_matrix_market",
]
