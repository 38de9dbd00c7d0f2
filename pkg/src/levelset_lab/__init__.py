"""Simulation lab for level sets and extreme values of finite Gaussian fields."""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    ConfigError,
    DegenerateModelError,
    EmptyLevelSetError,
    IndependenceViolationError,
    InvalidArgumentError,
    LabError,
    NotPSDError,
    ParseError,
    ValidationError,
)
from .field_models import (
    FieldModel,
    FieldSample,
    IndexSet,
    build_dgff,
    build_iid,
    build_sign_field,
    covariance_entry,
    load_covariance,
    normalize_to_spec,
)
from .sampler import (
    RngStream,
    SamplerKernel,
    decompose_sample,
    empirical_covariance,
    factorize,
    sample,
)
from .estimators import (
    BoundReport,
    GEstimate,
    analytic_g_pair,
    borell_tail_bound,
    concentration_check,
    estimate_g,
    expected_excess,
    extremality_ratio,
    gaussian_upper_tail,
    nondegeneracy_ratio,
    union_bound_g,
)
from .level_sets import (
    LevelSet,
    CardinalityResult,
    RatioResult,
    cardinality_experiment,
    conditional_g_estimate,
    extract_level_set,
    high_point_experiment,
    high_point_set,
    ratio_experiment,
)
from .valleys import (
    NetResult,
    ValleyReport,
    build_epsilon_net,
    find_multiple_valleys,
    mixture_coefficient,
    normalized_correlation,
    residual_variance_bound,
    verify_net,
)
