"""Synthetic multilayer datasets and the on-disk bundle format.

A bundle directory holds::

    layer_<s>.tsv   one undirected edge per line: i<TAB>j<TAB>w (0-based)
    features.csv    N rows x M columns, comma separated, no header
    labels.csv      optional, one nonnegative integer per line
    manifest.json   {version, n, m, s, k_true, has_labels}
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError
from .graph import MultilayerGraph, check_features, knn_layer

MANIFEST_VERSION = 1


@dataclass
class DatasetBundle:
    graph: MultilayerGraph
    features: np.ndarray
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = check_features(self.features, self.graph.num_vertices)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != (self.graph.num_vertices,):
                raise ValueError(
                    f"{labels.size} labels for {self.graph.num_vertices} vertices"
                )
            if labels.size and (labels.min() < 0 or not np.issubdtype(labels.dtype, np.integer)):
                raise ValueError("labels must be nonnegative integers")
            self.labels = labels.astype(np.int64)

    @property
    def k_true(self):
        return None if self.labels is None else int(self.labels.max(initial=-1) + 1)

    def subset(self, nodes):
        """Bundle restricted to ``nodes`` (induced subgraph, matching rows)."""
        idx = np.asarray(nodes, dtype=np.intp)
        return DatasetBundle(
            self.graph.subgraph(idx),
            self.features[idx],
            None if self.labels is None else self.labels[idx],
        )


@dataclass
class SyntheticSpec:
    """Parameters of the Gaussian-mixture multilayer generator.

    ``means`` (S x K x d) and ``scales`` (S x K, isotropic standard deviations)
    override the defaults. By default every layer places the K cluster means
    on a circle (a line when d == 1) with neighbouring means ``separation``
    standard deviations apart, each layer using its own random assignment of
    clusters to positions, and all scales equal to ``sigma``.
    """

    n_points: int = 100
    n_clusters: int = 4
    n_layers: int = 3
    dim_per_layer: int = 2
    knn_k: int = 20
    seed: int = 0
    sigma: float = 1.0
    separation: float = 4.0
    means: np.ndarray | None = field(default=None, repr=False)
    scales: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.n_clusters < 1 or self.n_layers < 1 or self.dim_per_layer < 1:
            raise ValueError("n_clusters, n_layers and dim_per_layer must be >= 1")
        if self.n_points < self.n_clusters:
            raise ValueError(f"n_points={self.n_points} < n_clusters={self.n_clusters}")
        if not 1 <= self.knn_k < self.n_points:
            raise ValueError(f"knn_k must satisfy 1 <= k < n_points, got {self.knn_k}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        shape = (self.n_layers, self.n_clusters)
        if self.means is not None:
            self.means = np.asarray(self.means, dtype=np.float64)
            if self.means.shape != shape + (self.dim_per_layer,):
                raise ValueError(f"means must have shape {shape + (self.dim_per_layer,)}")
        if self.scales is not None:
            self.scales = np.asarray(self.scales, dtype=np.float64)
            if self.scales.shape != shape or np.any(self.scales <= 0):
                raise ValueError(f"scales must be positive with shape {shape}")

    @property
    def feature_dim(self):
        return self.dim_per_layer * self.n_layers


def _anchor_positions(k, d, spacing):
    """K points with neighbouring distance ``spacing``: circle for d >= 2, line for d == 1."""
    pos = np.zeros((k, d))
    if k == 1:
        return pos
    if d == 1:
        pos[:, 0] = spacing * (np.arange(k) - (k - 1) / 2)
        return pos
    radius = spacing / (2 * math.sin(math.pi / k))
    angles = 2 * math.pi * np.arange(k) / k
    pos[:, 0] = radius * np.cos(angles)
    pos[:, 1] = radius * np.sin(angles)
    return pos


def generate_synthetic(spec):
    """Sample a multilayer dataset from per-layer Gaussian mixtures.

    Randomness: ``SeedSequence(spec.seed).spawn(S + 1)``; stream 0 draws the
    label permutation, stream ``s + 1`` draws everything for layer ``s``.
    Labels are balanced (sizes differ by at most one). Each layer gets a
    k-NN graph with reciprocal-distance weights; the features are the
    per-node concatenation of the S point clouds (M = d * S).
    """
    n, k, s, d = spec.n_points, spec.n_clusters, spec.n_layers, spec.dim_per_layer
    streams = [np.random.default_rng(c) for c in np.random.SeedSequence(spec.seed).spawn(s + 1)]
    labels = streams[0].permutation(np.arange(n) % k)

    anchors = _anchor_positions(k, d, spec.separation * spec.sigma)
    clouds, layers = [], []
    for layer in range(s):
        rng = streams[layer + 1]
        slots = rng.permutation(k)
        means = anchors[slots] if spec.means is None else spec.means[layer]
        scales = np.full(k, spec.sigma) if spec.scales is None else spec.scales[layer]
        noise = rng.standard_normal((n, d))
        pts = means[labels] + scales[labels, None] * noise
        clouds.append(pts)
        layers.append(knn_layer(pts, spec.knn_k))
    return DatasetBundle(MultilayerGraph(layers), np.hstack(clouds), labels)


# -- file formats -------------------------------------------------------------


def _fmt(x):
    return repr(float(x))


def write_edge_list(W, path):
    W = np.asarray(W)
    i, j = np.nonzero(np.triu(W, 1))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for a, b in zip(i, j):
            fh.write(f"{a}\t{b}\t{_fmt(W[a, b])}\n")


def read_edge_list(path, n=None):
    """Parse an undirected TSV edge list into a dense symmetric adjacency.

    ``n`` fixes the vertex count; otherwise it is ``1 + max index``.
    Identical duplicate edges are ignored; conflicting ones are an error.
    """
    edges = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise FormatError("expected 'i<TAB>j<TAB>w'", path, lineno)
            try:
                i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise FormatError(f"cannot parse edge: {exc}", path, lineno) from None
            if i < 0 or j < 0:
                raise FormatError("negative vertex index", path, lineno)
            if i == j:
                raise FormatError(f"self-loop on vertex {i}", path, lineno)
            if not math.isfinite(w) or w < 0:
                raise FormatError(f"invalid weight {parts[2]}", path, lineno)
            key = (min(i, j), max(i, j))
            if key in edges and edges[key] != w:
                raise FormatError(f"conflicting duplicate edge {key}", path, lineno)
            edges[key] = w
    size = max((b for _, b in edges), default=-1) + 1
    if n is None:
        n = size
    elif size > n:
        raise FormatError(f"vertex index {size - 1} out of range for N={n}", path)
    W = np.zeros((n, n))
    for (a, b), w in edges.items():
        W[a, b] = W[b, a] = w
    return W


def read_features(path, header=False):
    """Read an N x M CSV feature matrix (empty file gives a 0 x 0 array)."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if header and lineno == 1:
                continue
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise FormatError(f"cannot parse feature row: {exc}", path, lineno) from None
            if len(rows[-1]) != len(rows[0]):
                raise FormatError(
                    f"row has {len(rows[-1])} columns, expected {len(rows[0])}", path, lineno
                )
    if not rows:
        return np.zeros((0, 0))
    X = np.array(rows)
    if not np.all(np.isfinite(X)):
        raise FormatError("non-finite feature value", path)
    return X


def write_features(X, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in np.asarray(X):
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def read_labels(path):
    """Read cluster labels: one integer per line, or ``node_index,cluster_id`` rows.

    A non-numeric first line is treated as a header.
    """
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            field_ = line.split(",")[-1]
            try:
                value = int(field_)
            except ValueError:
                if lineno == 1:
                    continue
                raise FormatError(f"cannot parse label {field_!r}", path, lineno) from None
            if value < 0:
                raise FormatError("labels must be nonnegative", path, lineno)
            out.append(value)
    return np.array(out, dtype=np.int64)


def write_labels(labels, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in np.asarray(labels):
            fh.write(f"{int(v)}\n")


def save_bundle(bundle, directory):
    """Write a bundle; returns the list of written paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for s, W in enumerate(bundle.graph.layers):
        p = os.path.join(directory, f"layer_{s}.tsv")
        write_edge_list(W, p)
        paths.append(p)
    p = os.path.join(directory, "features.csv")
    write_features(bundle.features, p)
    paths.append(p)
    if bundle.labels is not None:
        p = os.path.join(directory, "labels.csv")
        write_labels(bundle.labels, p)
        paths.append(p)
    manifest = {
        "version": MANIFEST_VERSION,
        "n": bundle.graph.num_vertices,
        "m": int(bundle.features.shape[1]),
        "s": bundle.graph.num_layers,
        "k_true": bundle.k_true,
        "has_labels": bundle.labels is not None,
    }
    p = os.path.join(directory, "manifest.json")
    with open(p, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    paths.append(p)
    return paths


def load_bundle(layer_paths, feature_path, label_path=None, header=False):
    """Load and cross-validate layer, feature and label files.

    The vertex count is taken from the feature file; every layer and the
    label file must agree with it.
    """
    X = read_features(feature_path, header=header)
    n = X.shape[0]
    if not layer_paths:
        raise ValueError("at least one layer file is required")
    layers = [read_edge_list(p, n) for p in layer_paths]
    labels = None
    if label_path is not None:
        labels = read_labels(label_path)
        if labels.size != n:
            raise FormatError(f"{labels.size} labels but {n} feature rows", label_path)
    return DatasetBundle(MultilayerGraph(layers), X, labels)


def load_bundle_dir(directory):
    """Load a directory written by :func:`save_bundle`."""
    with open(os.path.join(directory, "manifest.json"), encoding="utf-8") as fh:
        manifest = json.load(fh)
    if manifest.get("version") != MANIFEST_VERSION:
        raise FormatError(f"unsupported manifest version {manifest.get('version')}", directory)
    layers = [os.path.join(directory, f"layer_{s}.tsv") for s in range(manifest["s"])]
    labels = os.path.join(directory, "labels.csv") if manifest.get("has_labels") else None
    bundle = load_bundle(layers, os.path.join(directory, "features.csv"), labels)
    if bundle.graph.num_vertices != manifest["n"] or bundle.features.shape[1] != manifest["m"]:
        raise FormatError("manifest counts do not match the files", directory)
    return bundle
