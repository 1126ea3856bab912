"""Satellite patch classification: handcrafted texture/vegetation features,
min-max normalization, DBN and SDAE classifiers, and separability analysis."""

__version__ = "0.1.0"

from . import analysis, dbn, features, normalize, patchio, pipeline, sdae
from .features import FEATURE_NAMES, FeatureConfig, extract, extract_batch
from .patchio import (
    ClassLabel,
    ClassScheme,
    Dataset,
    SyntheticSpec,
    default_demo_spec,
    generate_synthetic,
    load_dataset,
    save_dataset,
    shuffle_split,
)

__all__ = [
    "__version__",
    "analysis",
    "dbn",
    "features",
    "normalize",
    "patchio",
    "pipeline",
    "sdae",
    "FEATURE_NAMES",
    "FeatureConfig",
    "extract",
    "extract_batch",
    "ClassLabel",
    "ClassScheme",
    "Dataset",
    "SyntheticSpec",
    "default_demo_spec",
    "generate_synthetic",
    "load_dataset",
    "save_dataset",
    "shuffle_split",
]
