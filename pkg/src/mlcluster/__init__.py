"""Multilayer graph clustering with SPD layer aggregation and an orthogonal embedding network."""

from .aggregate import AggregationConfig, aggregate_graph, arithmetic_mean, geometric_mean
from .cluster import Partition, classify, kmeans, spectral_clustering
from .data import DatasetBundle, SyntheticSpec, generate_synthetic, load_bundle, load_bundle_dir, save_bundle
from .embed import EmbedderModel, TrainConfig, train
from .errors import FormatError, NumericalError, RankDeficiencyError, TrainingError
from .graph import MultilayerGraph, knn_layer, laplacian, shifted_laplacian
from .metrics import adjusted_rand, metrics_report, nmi, purity
from .pipeline import run_generalization, run_pipeline
from .spd import SpdMatrix, riemann_dist, spd_exp, spd_log

__version__ = "0.1.0"

__all__ = [
    "AggregationConfig",
    "DatasetBundle",
    "EmbedderModel",
    "FormatError",
    "MultilayerGraph",
    "NumericalError",
    "Partition",
    "RankDeficiencyError",
    "SpdMatrix",
    "SyntheticSpec",
    "TrainConfig",
    "TrainingError",
    "adjusted_rand",
    "aggregate_graph",
    "arithmetic_mean",
    "classify",
    "generate_synthetic",
    "geometric_mean",
    "kmeans",
    "knn_layer",
    "laplacian",
    "load_bundle",
    "load_bundle_dir",
    "metrics_report",
    "nmi",
    "purity",
    "riemann_dist",
    "run_generalization",
    "run_pipeline",
    "save_bundle",
    "shifted_laplacian",
    "spd_exp",
    "spd_log",
    "spectral_clustering",
    "train",
]
