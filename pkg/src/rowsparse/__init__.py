"""Determinantal sampling of row-sparse integer matrices and cokernel statistics.

The library samples n x n integer matrices whose rows are k-fold sums of
standard basis vectors, with probability proportional to the squared
determinant of the chosen rows, and computes their cokernel invariants: Smith
normal forms, p-Sylow subgroups, exact surjection moments, near-uniform
classification of kernel-vector types, and mod-2 corank defect bounds. A
hypertree model over simplicial boundary matrices shares the same sampler.
"""

from .errors import (
    DegenerateHostError,
    InvalidInputError,
    SizeLimitError,
    UndefinedFormError,
)
from .groups import (
    FiniteAbelianGroup,
    aut_order,
    cl_corank_probability,
    cl_probability,
    hom_count,
    p_groups_up_to,
    sur_count,
    sur_count_cokernel,
)
from .snf import (
    CokernelClass,
    PGroupType,
    cokernel,
    rank_mod_p,
    smith_normal_form,
    sylow,
    sylow_mod_prime_power,
)
from .structured import (
    boundary_matrix,
    build_row,
    gram_closed_form,
    gram_determinant,
    gram_rowwise,
    hypertree_identity,
    row_submatrix,
    row_vector,
)
from .sampling import (
    BasisSumRows,
    BoundaryRows,
    MatrixRows,
    SamplerConfig,
    enumerate_distribution,
    exact_subset_probability,
    marginal_leverage,
    sample_hypertree,
    sample_matrix,
    sample_volume,
)
from .moments import (
    NearUniformLabel,
    TypeMatrix,
    TypeVector,
    annihilation_probability,
    ball_constants,
    classify_near_uniform,
    convolution_powers,
    curvature_matrix,
    expected_annihilated_exact,
    expected_annihilated_gaussian,
    expected_annihilated_via_kl,
    kl_curvature_check,
    kl_divergence,
    m_matrix,
    order2_moment_floor,
    parity_closed_forms,
    surjection_moment_bruteforce,
    surjection_moment_exact,
    type_measures,
)
from .defect import (
    bonferroni_lower,
    column_is_isolated_double,
    corank_tail_floor,
    doubled_block_count,
    isolated_double_probability,
    mc_corank_tail,
    subset_family_mass,
)
from .experiment import (
    ExperimentConfig,
    TrialRecord,
    report_moment,
    report_tv,
    run_campaign,
    run_trial,
    verify_suite,
    wilson_interval,
)

__version__ = "0.1.0"
