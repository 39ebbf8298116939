"""Multilayer graphs, Laplacians and k-NN layer construction."""

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .spd import SpdMatrix

#: Zero-distance neighbours get weight 1/delta, delta = DUPLICATE_SCALE * median distance.
DUPLICATE_SCALE = 1e-9

#: Default diagonal shift, relative to the mean diagonal of the Laplacian.
DEFAULT_RELATIVE_SHIFT = 1e-6


def check_adjacency(W, name="layer"):
    """Validate a dense weighted adjacency matrix and return it as float64."""
    W = np.asarray(W, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != W.shape[1]:
        raise ValueError(f"{name}: adjacency must be square, got shape {W.shape}")
    if not np.all(np.isfinite(W)):
        raise ValueError(f"{name}: adjacency has non-finite weights")
    if np.any(W < 0):
        raise ValueError(f"{name}: negative edge weight")
    if np.any(np.diag(W) != 0):
        raise ValueError(f"{name}: self-loop (nonzero diagonal)")
    if not np.array_equal(W, W.T):
        raise ValueError(f"{name}: adjacency is not symmetric")
    return W


def check_features(X, n=None):
    """Validate an N x M feature matrix; optionally check N against ``n``."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain non-finite entries")
    if n is not None and X.shape[0] != n:
        raise ValueError(f"features have {X.shape[0]} rows, graph has {n} vertices")
    return X


class MultilayerGraph:
    """S weighted layers over a shared set of N vertices.

    Parameters
    ----------
    layers : sequence of array_like
        Dense N x N adjacency matrices: symmetric, nonnegative, zero diagonal.
    """

    def __init__(self, layers):
        layers = [check_adjacency(W, f"layer {s}") for s, W in enumerate(layers)]
        if not layers:
            raise ValueError("a multilayer graph needs at least one layer")
        n = layers[0].shape[0]
        for s, W in enumerate(layers):
            if W.shape[0] != n:
                raise ValueError(f"layer {s} has {W.shape[0]} vertices, expected {n}")
            W.setflags(write=False)
        self.layers = tuple(layers)

    @property
    def num_vertices(self):
        return self.layers[0].shape[0]

    @property
    def num_layers(self):
        return len(self.layers)

    def laplacians(self):
        return [laplacian(W) for W in self.layers]

    def subgraph(self, nodes):
        """Induced multilayer subgraph on ``nodes`` (in the given order)."""
        idx = np.asarray(nodes, dtype=np.intp)
        return MultilayerGraph([W[np.ix_(idx, idx)] for W in self.layers])

    def __repr__(self):
        return f"MultilayerGraph(num_vertices={self.num_vertices}, num_layers={self.num_layers})"


def laplacian(W):
    """Combinatorial Laplacian ``D - W`` of one layer."""
    W = check_adjacency(W)
    return np.diag(W.sum(axis=1)) - W


def shifted_laplacian(L, epsilon=None):
    """Return ``L + epsilon * I`` certified SPD.

    ``epsilon`` defaults to ``1e-6`` times the mean diagonal of ``L`` (and to
    ``1e-6`` itself for an edgeless layer).
    """
    L = np.asarray(L, dtype=np.float64)
    if epsilon is None:
        epsilon = default_shift(L)
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    return SpdMatrix(L + epsilon * np.eye(L.shape[0]))


def default_shift(L):
    scale = float(np.mean(np.diag(L)))
    return DEFAULT_RELATIVE_SHIFT * scale if scale > 0 else DEFAULT_RELATIVE_SHIFT


def knn_layer(points, k, chunk_size=512):
    """Reciprocal-distance k-nearest-neighbour graph, symmetrized by union.

    Each vertex selects its ``k`` nearest other vertices (ties broken by the
    smaller index); an edge is kept if either endpoint selected the other,
    with weight ``1 / ||p_i - p_j||``. Coincident points get the capped
    weight ``1 / delta`` with ``delta = 1e-9 * median nonzero distance``.

    Parameters
    ----------
    points : array_like, shape (n, d)
    k : int
        Number of neighbours, ``1 <= k < n``.

    Returns
    -------
    ndarray, shape (n, n)
        Symmetric adjacency with zero diagonal.
    """
    P = np.asarray(points, dtype=np.float64)
    if P.ndim == 1:
        P = P[:, None]
    if not np.all(np.isfinite(P)):
        raise ValueError("points contain non-finite coordinates")
    n = P.shape[0]
    if not 1 <= k < n:
        raise ValueError(f"k must satisfy 1 <= k < n (k={k}, n={n})")

    nbr = np.empty((n, k), dtype=np.intp)
    dist = np.empty((n, k))
    for start in range(0, n, chunk_size):
        rows = np.arange(start, min(start + chunk_size, n))
        D = cdist(P[rows], P)
        D[np.arange(len(rows)), rows] = np.inf
        # stable sort keeps equal distances in index order
        order = np.argsort(D, axis=1, kind="stable")[:, :k]
        nbr[rows] = order
        dist[rows] = np.take_along_axis(D, order, axis=1)

    weights = np.empty_like(dist)
    zero = dist == 0
    if np.any(zero):
        nonzero = pdist(P)
        nonzero = nonzero[nonzero > 0]
        median = float(np.median(nonzero)) if nonzero.size else 1.0
        weights[zero] = 1.0 / (DUPLICATE_SCALE * median)
    weights[~zero] = 1.0 / dist[~zero]

    W = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    W[rows, nbr.ravel()] = weights.ravel()
    # union: a selected pair carries the same distance from both sides
    return np.maximum(W, W.T)
