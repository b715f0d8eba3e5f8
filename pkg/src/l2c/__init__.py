"""Amortized generation of sparse, diverse and constraint-respecting
counterfactual explanations for tabular classifiers."""

from .counterfactual import CounterfactualSet, Generator, L2cConfig, L2cModel, generate, train
from .metrics import DesiderataReport
from .tabular import Dataset, DatasetSchema, FeatureSpec, load_csv, load_schema

__all__ = [
    "CounterfactualSet", "Generator", "L2cConfig", "L2cModel", "generate", "train",
    "DesiderataReport", "Dataset", "DatasetSchema", "FeatureSpec", "load_csv", "load_schema",
]
