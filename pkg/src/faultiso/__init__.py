"""Residual-generator synthesis and simultaneous additive/multiplicative
fault estimation with real-time performance bounds."""

from .bounds import (
    BoundInputs,
    BoundTrace,
    alpha_coeffs,
    beta_coeffs,
    constant_fault_dynamic_series,
    constant_fault_static_series,
    dynamic_bound,
    error_filter,
    evaluate_bounds,
    fault_onset,
    static_bound,
    var_product_check,
)
from .estimator import (
    DegenerateWindow,
    EstimatorTrace,
    FaultEstimate,
    PrefilterMode,
    RegressionConfig,
    dynamic_prefilter,
    pinv_norm,
    prefilter_step,
    regress,
    regression_constant,
    run_estimator,
    static_prefilter,
)
from .lti import BoundConstants, RationalFilter, residues, zero_ss_bound
from .model import (
    DaeModel,
    InfeasibleConversion,
    OdeModel,
    check_detectability,
    ode_to_dae,
    simulate_ode,
)
from .polymat import (
    PolyMatrix,
    block_toeplitz,
    poly_from_roots,
    rational_filter_step,
    run_rational_filter,
)
from .signals import (
    Signal,
    WindowStats,
    gen_piecewise,
    gen_sine,
    window_mean,
    window_norms,
    window_stats,
    window_std,
)
from .synthesis import (
    DetectorFilter,
    GainUnreachable,
    ImproperFilter,
    NoNullSpace,
    SynthesisError,
    run_residual,
    synthesize_detector,
)
from .vehicle import (
    BicycleParams,
    CaseStudy,
    DiscretePlant,
    Scenario,
    build_case_study,
    continuous_matrices,
    discretize,
    matrix_exp,
    simulate_plant,
)

__version__ = "0.1.0"
