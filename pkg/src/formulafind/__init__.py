"""formulafind: semantic and syntactic retrieval of LaTeX mathematical expressions."""

from .encoder import (
    ComplexityLabel,
    EncodedExpression,
    Vocabulary,
    complexity_label,
    default_vocabulary,
    encode,
    encode_codes,
    load_vocabulary,
    nested_depth,
    tokenize,
)
from .model import ModelConfig, ModelParams, Pooling, extract_features, forward, train
from .retrieval import (
    FeatureDatabase,
    RankedResult,
    build_feature_db,
    euclidean_distance,
    lcs_length,
    query_lcs,
    query_semantic,
)

__version__ = "0.1.0"

__all__ = [
    "ComplexityLabel",
    "EncodedExpression",
    "FeatureDatabase",
    "ModelConfig",
    "ModelParams",
    "Pooling",
    "RankedResult",
    "Vocabulary",
    "build_feature_db",
    "complexity_label",
    "default_vocabulary",
    "encode",
    "encode_codes",
    "euclidean_distance",
    "extract_features",
    "forward",
    "lcs_length",
    "load_vocabulary",
    "nested_depth",
    "query_lcs",
    "query_semantic",
    "tokenize",
    "train",
]
