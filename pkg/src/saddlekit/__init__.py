"""Saddle point reduction and critical-group verification toolkit.

Discretizes planar elliptic gradient systems on rectangles, solves the
weighted eigenvalue problems that define resonance, performs the saddle
point reduction onto the spectral splitting, searches for multiple
critical points, and verifies the homological identities (degree shift,
index identity, Morse inequalities) on low-dimensional model functionals
with cubical homology over GF(2).
"""

from .config import (
    ConfigError,
    RunConfig,
    SolverSettings,
    build_grid_from,
    build_model_from,
    load_config,
    parse_config,
    strategy_from,
)
from .cubical import (
    BettiVector,
    Box,
    CubicalPair,
    box_around,
    excision_ball_mask,
    relative_homology_z2,
    sublevel_mask,
    validate_pair,
)
from .expressions import ExpressionError
from .fields import (
    MatrixField,
    constant_field,
    diagonal_field,
    expression_field,
    scaled_field,
)
from .functional import FunctionalHandle, build_functional, phi_gradient, phi_value
from .grid import GridDomain, build_grid, laplacian
from .homology import (
    ModelFunctional,
    brouwer_index,
    builtin_models,
    critical_groups,
    critical_groups_at_infinity,
    morse_inequality_check,
    report_to_json,
    verify_index_shift,
    verify_shift_theorem,
    verify_theorem_A,
)
from .problem import (
    CheckReport,
    NonlinearityModel,
    aniso_resonant_model,
    check_infinity_sign,
    check_linear_growth,
    check_origin_sign,
    check_reduction_condition,
    expression_model,
    growth_samples,
    infinity_samples,
    origin_samples,
    pair_samples,
    quadratic_model,
    radial_log_model,
    spectral_gap_delta,
    verify_gradient_consistency,
)
from .reduction import (
    ReductionHandle,
    build_reduction,
    full_point,
    reduced_gradient,
    reduced_value,
    solve_psi,
)
from .search import (
    CriticalPointRecord,
    SearchResult,
    SearchStrategy,
    SyntheticHandle,
    evaluate_prediction,
    find_critical_points,
    predict_multiplicity,
    records_to_csv,
    records_to_json,
)
from .spectral import (
    A_MINUS_CASE,
    A_PLUS_CASE,
    SpectralSplit,
    Spectrum,
    build_split,
    cumulative_dims,
    normalize_resonance,
    resonant_index,
    solve_weighted_eigenproblem,
    spectrum_to_csv,
)

__version__ = "0.1.0"

__all__ = [
    "A_MINUS_CASE",
    "A_PLUS_CASE",
    "BettiVector",
    "Box",
    "CheckReport",
    "ConfigError",
    "CriticalPointRecord",
    "CubicalPair",
    "ExpressionError",
    "FunctionalHandle",
    "GridDomain",
    "MatrixField",
    "ModelFunctional",
    "NonlinearityModel",
    "ReductionHandle",
    "RunConfig",
    "SearchResult",
    "SearchStrategy",
    "SolverSettings",
    "SpectralSplit",
    "Spectrum",
    "SyntheticHandle",
    "aniso_resonant_model",
    "box_around",
    "brouwer_index",
    "build_functional",
    "build_grid",
    "build_grid_from",
    "build_model_from",
    "build_reduction",
    "build_split",
    "builtin_models",
    "check_infinity_sign",
    "check_linear_growth",
    "check_origin_sign",
    "check_reduction_condition",
    "constant_field",
    "critical_groups",
    "critical_groups_at_infinity",
    "cumulative_dims",
    "diagonal_field",
    "evaluate_prediction",
    "excision_ball_mask",
    "expression_field",
    "expression_model",
    "find_critical_points",
    "full_point",
    "growth_samples",
    "infinity_samples",
    "laplacian",
    "load_config",
    "morse_inequality_check",
    "normalize_resonance",
    "origin_samples",
    "pair_samples",
    "parse_config",
    "phi_gradient",
    "phi_value",
    "predict_multiplicity",
    "quadratic_model",
    "radial_log_model",
    "records_to_csv",
    "records_to_json",
    "reduced_gradient",
    "reduced_value",
    "relative_homology_z2",
    "report_to_json",
    "resonant_index",
    "scaled_field",
    "solve_psi",
    "solve_weighted_eigenproblem",
    "spectral_gap_delta",
    "spectrum_to_csv",
    "strategy_from",
    "sublevel_mask",
    "validate_pair",
    "verify_gradient_consistency",
    "verify_index_shift",
    "verify_shift_theorem",
    "verify_theorem_A",
]
