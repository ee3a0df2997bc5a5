"""Classification with auxiliary binary outcomes.

Estimates a high-dimensional linear rule for a target binary outcome by
pooling auxiliary outcomes into a shared direction, calibrating away the
pooling bias (a rescaling along the pooled index plus a sparse correction),
cross-fitting over sample halves, and testing individual coefficients with
a de-correlated score statistic.  A seeded Monte-Carlo harness benchmarks
the pipeline against baseline, direct-transfer, and multi-task comparators.
"""

from .data import (
    DataValidationError,
    Dataset,
    DecisionRule,
    DegenerateOutcomeError,
    load_dataset,
)
from .estimators import (
    CalibratedFit,
    CrossFitResult,
    HalfFit,
    PooledFit,
    cross_fit_estimate,
    fit_calibrated_k,
    fit_multitask_group_lasso,
    fit_pooled,
    fit_single_outcome,
    fit_transfer_direct,
    multitask_pooled_rule,
    select_auxiliary_by_f1,
    select_k_star,
    two_dataset_estimate,
)
from .inference import SaturatedRuleError, TestReport, decorrelated_test, fit_decorrelation
from .metrics import accuracy, f1_score, phi, phi_double_prime, phi_prime, rank_correlation
from .simulation import (
    GeneratedData,
    ResultTable,
    ScenarioConfig,
    generate,
    generate_design,
    generate_scenario_one,
    generate_scenario_two,
    run_experiment_grid,
)
from .solver import (
    PenalizedProblem,
    Solution,
    SolverConfig,
    SolverError,
    default_lambda_grid,
    group_soft_threshold,
    lambda_max,
    loss_value_grad,
    regularization_path,
    soft_threshold,
    solve,
)

__version__ = "0.1.0"
