"""Classifiers, metrics, feature rankings and evaluation protocols."""

from .metrics import EvalReport, auc_trapezoid, pool_reports, rates_from_matrix, roc_curve
from .models import (
    BAGGED_TREES,
    KINDS,
    LINEAR_SVM,
    LOGISTIC,
    RANDOM_FOREST,
    SURGEON_SVM,
    Model,
    ModelSpec,
    forest_spec,
    predict,
    train,
    train_arrays,
)
from .protocols import (
    CVResult,
    RunSummary,
    compare_split_modes,
    cross_domain_evaluate,
    evaluate,
    flip_test,
    fold_assignment,
    kfold_cv,
    most_frequent_features,
    repeated_holdout,
    run_many,
)
from .selection import (
    FeatureRanking,
    discretize,
    gain_ratio,
    mann_whitney_p,
    mutual_information,
    rank_chi_square,
    rank_gain_ratio,
    rank_mrmr,
    rank_significance,
)
