"""Predict relative post-finetuning performance of pretrained checkpoints
from pretraining proxy metrics, by learning to compare model pairs."""

from .dataset import (
    ModelRecord,
    ModelSet,
    Normalization,
    load_canonical,
    normalize_proxies,
    parse_csv,
)
from .evaluation import (
    AccuracyReport,
    Backbone,
    Combo,
    Factor,
    combo_accuracy,
    grouped_accuracy,
    proxy_accuracy,
    quantile_buckets,
    run_matrix,
    run_protocol,
)
from .gbdt import (
    GbdtConfig,
    GbdtModel,
    ImportanceReport,
    aggregate_importance,
    fit_gbdt,
    gain_importance,
    predict_proba_gbdt,
)
from .learners import (
    LogisticModel,
    MlpModel,
    TrainConfig,
    bce_loss,
    fit_logistic,
    fit_mlp,
    predict_proba,
)
from .pairing import (
    FEATURE_NAMES,
    FeatureVector,
    PairLabel,
    Task,
    enumerate_pairs,
    make_features,
    make_label,
)
from .ranking import BordaRanking, borda_scores, rank_all_models, top_k_recall

__version__ = "0.1.0"

__all__ = [
    "AccuracyReport",
    "Backbone",
    "BordaRanking",
    "Combo",
    "FEATURE_NAMES",
    "Factor",
    "FeatureVector",
    "GbdtConfig",
    "GbdtModel",
    "ImportanceReport",
    "aggregate_importance",
    "LogisticModel",
    "MlpModel",
    "ModelRecord",
    "ModelSet",
    "Normalization",
    "PairLabel",
    "Task",
    "TrainConfig",
    "bce_loss",
    "borda_scores",
    "combo_accuracy",
    "enumerate_pairs",
    "fit_gbdt",
    "fit_logistic",
    "fit_mlp",
    "gain_importance",
    "grouped_accuracy",
    "load_canonical",
    "make_features",
    "make_label",
    "normalize_proxies",
    "parse_csv",
    "predict_proba",
    "predict_proba_gbdt",
    "proxy_accuracy",
    "quantile_buckets",
    "rank_all_models",
    "run_matrix",
    "run_protocol",
    "top_k_recall",
]
