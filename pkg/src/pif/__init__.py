"""Preference isolation forests for anomaly detection on geometric data."""

from .baselines import IForParams, IsolationForest, LocalOutlierFactor, LofParams, lof_score
from .datasets import LabeledDataset, contamination_sweep, generate, preset
from .detector import PreferenceIsolationForest
from .evaluation import paired_t_test, roc_auc
from .forest import PifParams, PiForest, adjustment_c, build_forest
from .geometry import ModelFamily, ModelInstance, fit_minimal, residual
from .preference import EmbeddingConfig, PreferenceMatrix, embed, jaccard, sample_pool, tanimoto

__version__ = "0.1.0"

__all__ = [
    "EmbeddingConfig",
    "IForParams",
    "IsolationForest",
    "LabeledDataset",
    "LocalOutlierFactor",
    "LofParams",
    "ModelFamily",
    "ModelInstance",
    "PifParams",
    "PiForest",
    "PreferenceIsolationForest",
    "PreferenceMatrix",
    "adjustment_c",
    "build_forest",
    "contamination_sweep",
    "embed",
    "fit_minimal",
    "generate",
    "jaccard",
    "lof_score",
    "paired_t_test",
    "preset",
    "residual",
    "roc_auc",
    "sample_pool",
    "tanimoto",
]
