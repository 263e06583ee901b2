"""lrlab: spectrum-aware learning-rate schedules for SGD on quadratics,
with exact loss evaluation, Monte-Carlo checks, convergence bounds, and a
ridge-regression experiment harness."""

from .errors import (
    DegenerateSpectrumError,
    InfeasibleError,
    InvalidParameterError,
    LrLabError,
    ParseError,
)
from .spectrum import (
    DyadicBuckets,
    EigenSpectrum,
    PowerLawSpec,
    bucketize,
    parse_esd_file,
    power_law_buckets,
    preprocess,
    sample_power_law,
    write_esd_file,
)
from .schedules import (
    EigencurveParams,
    PerCoordinateSchedule,
    Schedule,
    allocate_delta_numeric,
    allocate_delta_sqrt,
    build_constant,
    build_cosine,
    build_cosine_power,
    build_eigencurve,
    build_elastic_step_decay,
    build_exponential,
    build_general_step_decay,
    build_inverse_time,
    build_inverse_time_practical,
    build_per_coordinate,
    build_step_decay_ge,
    read_schedule_csv,
    sqrt_allocation_real,
    variance_surrogate,
    write_schedule_csv,
)
from .quadsim import (
    ExactLossReport,
    QuadraticProblem,
    ema_trajectory,
    exact_expected_loss,
    exact_expected_loss_per_coordinate_schedule,
    load_problem,
    monte_carlo_expected_loss,
    replica_seeds,
    save_problem,
    sgd_run,
)
from .bounds import (
    BoundReport,
    corollary1_bound,
    extra_term_table,
    lemma1_bound,
    power_law_constant,
    prop1_bound,
    prop2_bound,
    sqrt_mass_ratio,
    step_decay_lower_bound,
    theorem1_bound,
)
from .ridge import (
    Dataset,
    GridPoint,
    GridSearchResult,
    RidgeModel,
    build_ridge_schedule,
    fit_closed_form,
    grid_search,
    make_synthetic_least_squares,
    parse_libsvm,
    ridge_loss,
    run_ridge_sgd,
)

__version__ = "0.1.0"
