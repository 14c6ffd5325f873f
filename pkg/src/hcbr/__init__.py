"""Hypergraph case-based reasoning for binary classification."""

from .dataset import NEGATIVE, POSITIVE, Case, CsvConfig, Dataset, FeatureInterner, parse_csv, parse_sparse
from .decision import ABSTAIN, EtaConfig, LocalityConfig, decide_full, decide_r1, decide_r2
from .hypergraph import Partition, build_partition
from .model import HCBRModel, compute_strengths, deserialize_model, fit, serialize_model, train

__version__ = "0.1.0"

__all__ = [
    "ABSTAIN", "NEGATIVE", "POSITIVE", "Case", "CsvConfig", "Dataset", "EtaConfig", "FeatureInterner",
    "HCBRModel", "LocalityConfig", "Partition", "build_partition", "compute_strengths", "decide_full",
    "decide_r1", "decide_r2", "deserialize_model", "fit", "parse_csv", "parse_sparse",
    "serialize_model", "train",
]
