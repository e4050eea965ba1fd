"""Troll-comment detection for news-forum data.

Dataset construction from accusations and leaked troll labels, a feature
suite over text, metadata and lexicons, from-scratch logistic regression and
cross-validated ablation experiments.
"""

from .corpus import Comment, Label, LabeledDataset, UserStats
from .features import ALL_GROUPS, FeatureGroup, Resources, extract_raw
from .learn import Model, TrainParams, cross_validate, fit_model

__version__ = "0.1.0"

__all__ = [
    "ALL_GROUPS",
    "Comment",
    "FeatureGroup",
    "Label",
    "LabeledDataset",
    "Model",
    "Resources",
    "TrainParams",
    "UserStats",
    "cross_validate",
    "extract_raw",
    "fit_model",
]
