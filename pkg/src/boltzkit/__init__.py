"""boltzkit: spectral toolkit for kinetic transport, collision operators,
dispersive estimates, and Duhamel hierarchies on phase-space grids."""

import os as _os

# BOLTZKIT_THREADS caps numeric-library parallelism.  The translation to the
# BLAS/OpenMP variables must happen before numpy is first imported, which is
# why it lives at the very top of the package; explicitly set library
# variables always win over the cap.
_cap = _os.environ.get("BOLTZKIT_THREADS")
if _cap is not None and _cap.isdigit() and int(_cap) > 0:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
    ):
        _os.environ.setdefault(_var, _cap)
del _os, _cap

from .errors import (
    BoltzkitError,
    ConfigParseError,
    ConfigurationError,
    GeometryError,
    InstabilityError,
    InsufficientDataError,
    NumericalRangeError,
    RangeError,
    RegimeError,
    UnsupportedDimensionError,
)
from .spectral_core import (
    CONVENTION_VERSION,
    DyadicLevel,
    NormSpec,
    PhaseField,
    SpectralGrid,
    Trajectory,
    l2_norm,
    lp_project,
    make_field,
    make_grid,
    norm,
    propagate,
    scale_xi,
    transform,
)
from .collision import (
    CollisionKernelSpec,
    calibrate,
    check_annihilation,
    conserved_moments,
    q_bobylev,
    q_direct,
    q_full,
)
from .estimates import (
    EstimateReport,
    bilinear_ratio,
    critical_exponent,
    exponent_identity,
    fit_exponent,
    regularity_report,
    report_to_csv,
    report_to_json,
    rough_term_report,
    strichartz_report,
)
from .solver import (
    SolverConfig,
    band_limited_random,
    load_trajectory,
    maxwellian,
    maxwellian_with_mode,
    richardson_order,
    save_trajectory,
    solve,
    step,
    uniqueness_experiment,
)
from .hierarchy import (
    CollapseMap,
    DuhamelLeaf,
    DuhamelNode,
    DuhamelTree,
    EchelonClass,
    SlotState,
    apply_time_permutation,
    boardgame_identity_report,
    build_duhamel_tree,
    class_table_csv,
    contraction_demo,
    duhamel_reconstruction,
    echelon_reduce,
    enumerate_collapse_maps,
    eval_J_direct,
    expand_tree,
    iterate_bound,
    km_classes,
    simplex_quadrature,
    time_domain_sample,
    tree_to_string,
)

__version__ = "0.1.0"

__all__ = [
    "BoltzkitError",
    "ConfigParseError",
    "ConfigurationError",
    "GeometryError",
    "InstabilityError",
    "InsufficientDataError",
    "NumericalRangeError",
    "RangeError",
    "RegimeError",
    "UnsupportedDimensionError",
    "CONVENTION_VERSION",
    "DyadicLevel",
    "NormSpec",
    "PhaseField",
    "SpectralGrid",
    "Trajectory",
    "l2_norm",
    "lp_project",
    "make_field",
    "make_grid",
    "norm",
    "propagate",
    "scale_xi",
    "transform",
    "CollisionKernelSpec",
    "calibrate",
    "check_annihilation",
    "conserved_moments",
    "q_bobylev",
    "q_direct",
    "q_full",
    "EstimateReport",
    "bilinear_ratio",
    "critical_exponent",
    "exponent_identity",
    "fit_exponent",
    "regularity_report",
    "report_to_csv",
    "report_to_json",
    "rough_term_report",
    "strichartz_report",
    "SolverConfig",
    "band_limited_random",
    "load_trajectory",
    "maxwellian",
    "maxwellian_with_mode",
    "richardson_order",
    "save_trajectory",
    "solve",
    "step",
    "uniqueness_experiment",
    "CollapseMap",
    "DuhamelLeaf",
    "DuhamelNode",
    "DuhamelTree",
    "EchelonClass",
    "SlotState",
    "apply_time_permutation",
    "boardgame_identity_report",
    "build_duhamel_tree",
    "class_table_csv",
    "contraction_demo",
    "duhamel_reconstruction",
    "echelon_reduce",
    "enumerate_collapse_maps",
    "eval_J_direct",
    "expand_tree",
    "iterate_bound",
    "km_classes",
    "simplex_quadrature",
    "time_domain_sample",
    "tree_to_string",
    "__version__",
]
