"""Dynamic survival prediction via landmark super-datasets and boosted
Poisson trees.

The pipeline: simulate or ingest event-history data with time-dependent
covariates, draw random landmark ages per subject, expand each
(subject, landmark) pair into occurrence/exposure rows on a time
partition, fit gradient-boosted trees under Poisson loss to the
resulting super-dataset, and turn the fitted log-hazard into dynamic
survival probabilities by exact piecewise-constant integration.
"""

__version__ = "0.1.0"

from .boost import (
    BoostModel,
    BoostParams,
    GRADIENT,
    Leaf,
    NEWTON,
    Split,
    boost_fit,
    cross_validate_nrounds,
    fit_tree,
    poisson_grad_hess,
    poisson_loss,
    read_model,
    write_model,
)
from .core import (
    CapBounds,
    CovariatePath,
    DEFAULT_CAP,
    Partition,
    SubjectRecord,
    make_partition,
    time_grid,
)
from .errors import (
    ConfigError,
    DataError,
    DegenerateDataError,
    EnvelopeViolationError,
    InvalidArgumentError,
    LmboostError,
    OutOfDomainError,
)
from .evaluate import (
    EmpiricalMeasure,
    MAPE,
    RMSE,
    TestPoint,
    build_test_set,
    l1_mu_error,
    measure_from_table,
    predict_test_points,
    score,
)
from .explain import gain_importance, marginal_hazard, partial_dependence
from .ingest import (
    LongitudinalSchema,
    PBC2_HORIZON,
    PBC2_SCHEMA,
    read_longitudinal_csv,
    simulated_schema,
    visit_times,
    write_longitudinal_csv,
)
from .landmark import (
    LandmarkScheme,
    OccExpTable,
    UNIFORM,
    VISIT_BASED,
    build_collapsed_super_dataset,
    build_super_dataset,
    collapse,
    draw_landmarks,
    draw_landmarks_panel,
    read_table_csv,
    write_table_csv,
)
from .predict import (
    SurvivalCurve,
    predict_log_hazard,
    predict_survival,
    predict_survival_curve,
)
from .simulate import (
    Scenario,
    oracle_survival,
    scenario_constant,
    scenario_highdim,
    scenario_linear,
    scenario_nonlinear,
    scenario_two_state,
    simulate_panel,
    simulate_subject,
    two_state_survival_analytic,
)
