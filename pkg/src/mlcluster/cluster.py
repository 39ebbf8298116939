"""K-means, the spectral-clustering baseline and nearest-center classification."""

from dataclasses import dataclass

import numpy as np

from .spd import as_spd

DEFAULT_RESTARTS = 10
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-9


@dataclass
class Partition:
    """Hard clustering of N points.

    Attributes
    ----------
    assignments : ndarray of int, shape (N,)
        Cluster id in ``0..K-1`` per point.
    centers : ndarray, shape (K, dim)
    inertia : float
        Sum of squared distances from points to their assigned center.
    """

    assignments: np.ndarray
    centers: np.ndarray
    inertia: float

    @property
    def n_clusters(self):
        return self.centers.shape[0]


def _sq_dists(points, centers):
    # explicit differences, not the |a|^2 - 2ab + |b|^2 expansion: keeps exact zeros
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _kmeanspp(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    closest = _sq_dists(points, centers[:1])[:, 0]
    for j in range(1, k):
        total = closest.sum()
        if total > 0:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centers[j] = points[idx]
        closest = np.minimum(closest, _sq_dists(points, centers[j : j + 1])[:, 0])
    return centers


def _assign(points, centers):
    d = _sq_dists(points, centers)
    labels = np.argmin(d, axis=1)
    return labels, d[np.arange(points.shape[0]), labels]


def lloyd(points, centers, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL, history=None):
    """Lloyd iterations from the given centers; returns a :class:`Partition`.

    Empty clusters are reseeded at the point farthest from its center.
    ``history``, if a list, receives the inertia after every assignment step.
    """
    centers = np.array(centers, dtype=np.float64)
    k = centers.shape[0]
    labels, d = _assign(points, centers)
    inertia = float(d.sum())
    if history is not None:
        history.append(inertia)
    for _ in range(max_iter):
        for j in range(k):
            members = labels == j
            if members.any():
                centers[j] = points[members].mean(axis=0)
            else:
                far = int(np.argmax(d))
                centers[j] = points[far]
                labels[far] = j
                d[far] = 0.0
        labels, d = _assign(points, centers)
        new = float(d.sum())
        if history is not None:
            history.append(new)
        done = inertia - new <= tol * max(inertia, np.finfo(float).tiny)
        inertia = new
        if done:
            break
    return Partition(labels.astype(np.int64), centers, inertia)


def kmeans(points, k, restarts=DEFAULT_RESTARTS, seed=0, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """K-means with k-means++ seeding, keeping the best of ``restarts`` runs.

    Parameters
    ----------
    points : array_like, shape (N, dim)
    k : int
        Number of clusters, ``1 <= k <= N``.
    restarts : int
        Independent seeded runs; the lowest inertia wins (earliest on ties).
    seed : int
        Seeds the whole procedure; equal seeds give equal partitions.
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={n}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    best = None
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        part = lloyd(X, _kmeanspp(X, k, rng), max_iter=max_iter, tol=tol)
        if best is None or part.inertia < best.inertia:
            best = part
    return best


def spectral_embedding(L, k):
    """Eigenvectors of the ``k`` smallest eigenvalues of ``L`` as an N x k matrix."""
    L = as_spd(L)
    if not 1 <= k <= L.dim:
        raise ValueError(f"need 1 <= k <= N, got k={k}, N={L.dim}")
    return np.array(L.eigenvectors[:, :k])


def spectral_clustering(L, k, restarts=DEFAULT_RESTARTS, seed=0):
    """K-means on the rows of the bottom-``k`` eigenvectors of ``L``."""
    return kmeans(spectral_embedding(L, k), k, restarts=restarts, seed=seed)


def nearest_center(embeddings, centers):
    """Index of the closest center per row; ties go to the smaller index."""
    E = np.asarray(embeddings, dtype=np.float64)
    if E.ndim == 1:
        E = E[None, :]
    C = np.asarray(centers, dtype=np.float64)
    if E.shape[1] != C.shape[1]:
        raise ValueError(f"embedding dimension {E.shape[1]} != center dimension {C.shape[1]}")
    # argmin returns the first minimum
    return np.argmin(_sq_dists(E, C), axis=1).astype(np.int64)


def classify(model, R, centers, x):
    """Cluster ids for feature rows ``x`` using the whitened network embedding.

    ``x`` may be one feature vector (returns an int) or an (n, M) array.
    """
    from .embed import embed_new

    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if x.shape[-1] != model.input_dim:
        raise ValueError(f"features have length {x.shape[-1]}, expected M={model.input_dim}")
    if x.ndim == 2 and x.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    ids = nearest_center(embed_new(model, R, x), centers)
    return int(ids[0]) if single else ids


def save_partition_csv(assignments, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node_index,cluster_id\n")
        for i, c in enumerate(np.asarray(assignments)):
            fh.write(f"{i},{int(c)}\n")


def save_centers_csv(centers, path):
    np.savetxt(path, np.asarray(centers), delimiter=",", fmt="%.17g")
