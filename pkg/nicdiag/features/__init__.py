from nicdiag.features.fusion import (
    ABSENT,
    AnomalyVector,
    FeatureSchema,
    NicPairFeatureVector,
    NormalSampleLibrary,
    build_feature_vector,
    build_feature_vectors,
    compress,
    compress_all,
    load_library,
    save_library,
    similarity,
)
from nicdiag.features.levels import LevelSymbol, level_symbols
from nicdiag.features.logcluster import (
    LogClusterModel,
    LogQuantFeature,
    TemplateVector,
    cluster_templates,
    fit_normal_counts,
    load_log_model,
    quantize_counts,
    save_log_model,
    vectorize_templates,
    window_counts,
)
from nicdiag.features.patterns import (
    PatternClass,
    PatternModel,
    classify_pattern,
    classify_patterns,
    load_pattern_model,
    normalize_slice,
    save_pattern_model,
    train_pattern_model,
)
from nicdiag.features.shapes import generate_shape, generate_shape_corpus
from nicdiag.features.templates import WILDCARD, LogTemplate, TemplateParser, parse_templates

__all__ = [
    "ABSENT",
    "AnomalyVector",
    "FeatureSchema",
    "LevelSymbol",
    "LogClusterModel",
    "LogQuantFeature",
    "LogTemplate",
    "NicPairFeatureVector",
    "NormalSampleLibrary",
    "PatternClass",
    "PatternModel",
    "TemplateParser",
    "TemplateVector",
    "WILDCARD",
    "build_feature_vector",
    "build_feature_vectors",
    "classify_pattern",
    "classify_patterns",
    "cluster_templates",
    "compress",
    "compress_all",
    "fit_normal_counts",
    "generate_shape",
    "generate_shape_corpus",
    "level_symbols",
    "load_library",
    "load_log_model",
    "load_pattern_model",
    "normalize_slice",
    "parse_templates",
    "quantize_counts",
    "save_library",
    "save_log_model",
    "save_pattern_model",
    "similarity",
    "train_pattern_model",
    "vectorize_templates",
    "window_counts",
]
