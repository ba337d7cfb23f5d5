"""treescore: from-scratch tree ensembles for credit default scoring.

Random forest and second-order gradient-boosted trees over multi-source
borrower records, evaluated with precision-recall, ROC/AUC, Lorenz curves and
the K-S statistic.  See the README for the CLI walkthrough.
"""

__version__ = "0.1.0"

from .boosting import (
    BoostedModel,
    BoostParams,
    GradHess,
    fit_boosted,
    leaf_weight,
    logistic_grad_hess,
    predict_proba_boosted,
    split_gain,
    training_loss_curve,
)
from .dataset import (
    ColumnMeta,
    EncodedMatrix,
    FieldSpec,
    RecordBatch,
    SourceSchema,
    SplitSpec,
    apply_encoding,
    drop_missing,
    encode,
    join_sources,
    load_source_csv,
    train_test_split,
)
from .forest import (
    ForestModel,
    ForestParams,
    fit_forest,
    predict_class_forest,
    predict_proba_forest,
)
from .metrics import (
    ConfusionCounts,
    CurveReport,
    ScoredSet,
    confusion_at,
    evaluate_scores,
    ks_lorenz,
    pr_curve,
    precision,
    recall,
    roc_auc,
)
from .model_io import load_model, save_model
from .synthetic import GeneratorConfig, GeneratorTruth, generate_synthetic
from .tree import SplitCandidate, Tree, best_split, predict_row
from .tuning import GridSpec, TrialResult, best_trial, run_grid

__all__ = [name for name in dir() if not name.startswith("_")]
