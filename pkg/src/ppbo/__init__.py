"""Preference-based Bayesian optimization from line-optimum feedback."""

from .geometry import (
    Domain,
    DomainError,
    FeasibleInterval,
    IntervalError,
    ProjectionError,
    ProjectionVector,
    ProjectiveQuery,
    QueryError,
    as_unit_point,
    coordinate_projection,
    denormalize_point,
    embed,
    feasible_interval,
    make_projection,
    normalize_point,
    query_with_reference,
)
from .gp import (
    FitError,
    Hyperparameters,
    ModelState,
    NumericalError,
    Observation,
    SchemaError,
    TgnSchedule,
    fit_map,
    functional_T,
    kernel_eval,
    kernel_matrix,
    laplace_precision,
    load_model,
    make_observation,
    model_from_dict,
    model_to_dict,
    posterior_mean_argmax,
    predict,
    predict_mean,
    sample_pseudo_observations,
    save_model,
    smoothed_probit,
    smoothed_probit_quadrature,
)
from .acquisition import (
    AcquisitionConfig,
    AcquisitionResult,
    expected_improvement,
    explore_score,
    next_query_exploit,
    next_query_integrated_ei,
    next_query_pcd,
    next_query_random,
    optimize_acquisition,
    select_next_query,
    thompson_max_sample,
)
from .oracles import (
    OracleAnswer,
    TestFunction,
    eval_test_function,
    global_minimum,
    make_test_function,
    projective_feedback,
)
from .harness import (
    BenchmarkConfig,
    BenchmarkResult,
    ConvergenceRecord,
    initial_queries,
    run_benchmark,
    write_csv,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
