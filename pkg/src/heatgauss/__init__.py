"""Numerical laboratory for boundary-decaying Gaussian heat-kernel bounds.

Discretizes uniformly elliptic operators of order 2m (m <= 3) with Dirichlet
conditions on an interval, computes heat kernels spectrally, and verifies the
twisted-semigroup and envelope estimates by fit-and-validate sweeps.
"""

from .assembly import (
    FormMatrix,
    OperatorSpec,
    assemble_form,
    constant_coefficient,
    difference_matrix,
    frac_power,
    load_coefficients_csv,
    measure_ellipticity,
    polyharmonic_spec,
)
from .bounds import (
    BoundEnvelope,
    FitResult,
    boundary_slope,
    envelope_eval,
    fit_envelope_constants,
    longtime_rate,
    optimal_lambda,
    smalltime_prefactor,
    sobolev_pointwise_check,
)
from .core import (
    GammaSchedule,
    Grid1D,
    GTildeFn,
    MultiIndex,
    boundary_distance,
    epsilon_from_gamma,
    gamma_from_epsilon,
    gtilde,
    schedule_from_gamma,
)
from .errors import (
    ConditioningError,
    ConfigurationError,
    ConsistencyError,
    ContractError,
    DomainError,
    EllipticityError,
    HeatGaussError,
    NumericalError,
    ParameterError,
    PropertyViolation,
    ResolutionWarning,
    SearchBoundError,
    UnsupportedError,
)
from .inequalities import (
    SearchGrid,
    check_basic,
    check_bond,
    check_epsilon,
    check_main,
    check_stephen,
    gtilde_majorant,
    young_constant,
)
from .profiles import Profile, get_profile
from .spectral import (
    HeatKernelEvaluator,
    SpectralDecomposition,
    evolved_form_bound_check,
    jacobi_eigh,
    kernel_derivative,
    kernel_eval,
    semigroup_apply,
    spectral_gap,
)
from .twist import (
    TwistSpec,
    TwistedOperator,
    appendix_b_identities,
    evolved_twisted_form_check,
    form_perturbation_bound_fit,
    numerical_range_sector,
    per_lambda,
    sector_samples,
    sector_shift_search,
    twisted_kernel,
    twisted_semigroup_norm_fit,
)

__version__ = "1.0.0"
