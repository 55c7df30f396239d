"""Monte Carlo laboratory for two-speed branching random walks."""

from .laws import (
    AssumptionReport,
    Gaussian,
    Laplace,
    PointMasses,
    ReproductionLaw,
    TiltParams,
    binary_gaussian,
    check_assumptions,
    kappa,
    kappa_derivatives,
    rademacher_pair,
    sample_offspring,
    sample_size_biased_offspring,
    sample_tilted_step,
    single_child_at,
)
from .params import (
    FAST,
    MEAN,
    SLOW,
    CenteringSequence,
    RegimeSpec,
    centering,
    centering_sequence,
    classify_regime,
    solve_theta_mixed,
    solve_theta_star,
    speed,
)
from .engine import (
    AnnotationSpec,
    PopulationSnapshot,
    SimulationPlan,
    SimulationResult,
    TopK,
    Window,
    annotation_spec_for,
    default_truncation_constants,
    default_window,
    extremal_points,
    max_of,
    simulate,
)
from .martingales import (
    ClampedRamp,
    CltSpec,
    ConstantFn,
    CosineBump,
    MartingaleValue,
    additive_martingale,
    clt_functional,
    derivative_martingale,
    expectation_under_gaussian,
    truncated_clt_functional,
)
from .spine import (
    EndpointBox,
    EndpointGaussBump,
    EndpointIndicatorBelow,
    ManyToOneResult,
    OneFunctional,
    SpinedTree,
    SpineWalk,
    many_to_one_check,
    sample_spine_walk,
    sample_spined_tree,
)
from .extremes import (
    DecorationResult,
    empirical_laplace,
    fit_shift_constant,
    gumbel_mixture_cdf,
    sample_decoration,
)
from .pointproc import PointSample, RampFunction
from .stats import EmpiricalCdf, FitResult, bootstrap_ci, ks_distance, tail_slope

__version__ = "0.1.0"
