"""End-to-end runs: aggregate, embed, cluster, score."""

import logging
from dataclasses import dataclass, field

import numpy as np

from .aggregate import AggregationConfig, aggregate_graph
from .cluster import DEFAULT_RESTARTS, classify, kmeans, spectral_clustering
from .embed import EmbedderModel, TrainConfig, train
from .graph import MultilayerGraph, knn_layer
from .metrics import metrics_report

logger = logging.getLogger(__name__)

DEFAULT_HIDDEN = (400, 200, 100)


@dataclass
class PipelineResult:
    aggregated: object
    partition: object
    model: EmbedderModel | None = None
    embedding: object = None
    metrics: dict | None = None
    extras: dict = field(default_factory=dict)

    @property
    def cholesky_factor(self):
        return None if self.embedding is None else self.embedding.cholesky_factor


def feature_knn_graph(features, k):
    """Single-layer graph built on the concatenated features."""
    return MultilayerGraph([knn_layer(features, k)])


def run_pipeline(
    bundle,
    k,
    method="geometric",
    agg_cfg=None,
    train_cfg=None,
    hidden=DEFAULT_HIDDEN,
    restarts=DEFAULT_RESTARTS,
    seed=0,
    clusterer="network",
    graph=None,
):
    """Cluster a bundle's nodes.

    Parameters
    ----------
    bundle : DatasetBundle
    k : int
        Number of clusters (also the embedding dimension).
    method : {"geometric", "arithmetic"}
        Layer aggregator.
    clusterer : {"network", "spectral"}
        ``"network"`` trains the embedding network on the features;
        ``"spectral"`` runs K-means on the Laplacian eigenvectors (graph only).
    graph : MultilayerGraph, optional
        Replaces ``bundle.graph`` (e.g. a single k-NN layer on the features).
    seed : int
        Seeds network initialization and K-means unless ``train_cfg`` sets its own.
    """
    graph = bundle.graph if graph is None else graph
    train_cfg = train_cfg or TrainConfig(seed=seed)
    logger.info("aggregating %d layer(s) with the %s mean", graph.num_layers, method)
    L = aggregate_graph(graph, method, agg_cfg or AggregationConfig())

    if clusterer == "spectral":
        part = spectral_clustering(L, k, restarts=restarts, seed=seed)
        result = PipelineResult(L, part)
    elif clusterer == "network":
        sizes = (bundle.features.shape[1], *hidden, k)
        model = EmbedderModel.initialize(sizes, seed=train_cfg.seed)
        logger.info("training %s on %d nodes", model, bundle.features.shape[0])
        emb = train(model, bundle.features, L.array, train_cfg)
        logger.info("training stopped after %d steps, loss %.6g", emb.steps, emb.final_loss)
        part = kmeans(emb.embedding, k, restarts=restarts, seed=seed)
        result = PipelineResult(L, part, model, emb)
    else:
        raise ValueError(f"unknown clusterer {clusterer!r}")

    if bundle.labels is not None:
        result.metrics = metrics_report(part.assignments, bundle.labels)
    return result


def run_generalization(bundle, k, fraction, repeats, seed=0, **kwargs):
    """Train on random node subsets, classify every node, score against labels.

    Subset ``r`` is drawn from ``SeedSequence(seed).spawn(repeats)[r]``. With
    ``fraction == 1`` every repeat uses all nodes.

    Returns
    -------
    dict
        ``train_fraction``, ``repeats``, per-repeat ``runs`` metrics, and
        ``<score>_mean`` / ``<score>_std`` for purity, nmi and ari.
    list of PipelineResult
    """
    if bundle.labels is None:
        raise ValueError("generalization runs need ground-truth labels")
    if not 0 < fraction <= 1:
        raise ValueError(f"train fraction must be in (0, 1], got {fraction}")
    n = bundle.graph.num_vertices
    size = max(k, int(round(fraction * n)))
    runs, results = [], []
    for r, child in enumerate(np.random.SeedSequence(seed).spawn(repeats)):
        nodes = np.sort(np.random.default_rng(child).permutation(n)[:size])
        sub = bundle.subset(nodes)
        res = run_pipeline(sub, k, seed=seed, **kwargs)
        pred = classify(res.model, res.cholesky_factor, res.partition.centers, bundle.features)
        res.extras.update(train_nodes=nodes, predictions=pred)
        report = metrics_report(pred, bundle.labels)
        logger.info("repeat %d/%d: nmi %.4f", r + 1, repeats, report["nmi"])
        runs.append(report)
        results.append(res)
    summary = {"train_fraction": fraction, "repeats": repeats, "runs": runs}
    for key in ("purity", "nmi", "ari"):
        vals = np.array([run[key] for run in runs])
        summary[f"{key}_mean"] = float(vals.mean())
        summary[f"{key}_std"] = float(vals.std())
    return summary, results
