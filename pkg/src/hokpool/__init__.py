"""Higher-order kernel (HOK) pooling of per-frame classifier score sequences."""
from .classify import EvalReport, LinearModel, cross_validate, predict_scores, train_linear
from .config import RunConfig, load_config
from .datasets import Dataset, load_dataset, save_dataset, synth_generate
from .kernel_maps import PivotSet, SequenceKernelParams, feature_map, gaussian_kernel
from .pivots import build_pivot_set, equispaced_temporal_pivots, learn_score_pivots
from .pooling import (
    Descriptor,
    HokConfig,
    ScoreSequence,
    average_pool,
    concat,
    hok_descriptor,
    second_order_descriptor,
)

__version__ = "0.1.0"

__all__ = [
    "Dataset",
    "Descriptor",
    "EvalReport",
    "HokConfig",
    "LinearModel",
    "PivotSet",
    "RunConfig",
    "ScoreSequence",
    "SequenceKernelParams",
    "average_pool",
    "build_pivot_set",
    "concat",
    "cross_validate",
    "equispaced_temporal_pivots",
    "feature_map",
    "gaussian_kernel",
    "hok_descriptor",
    "learn_score_pivots",
    "load_config",
    "load_dataset",
    "predict_scores",
    "save_dataset",
    "second_order_descriptor",
    "synth_generate",
    "train_linear",
]
