"""Layer aggregation: merge per-layer Laplacians into one SPD matrix.

Two aggregators are provided. :func:`arithmetic_mean` is the Euclidean
baseline. :func:`geometric_mean` runs the Karcher gradient flow on the SPD
manifold::

    L_{t+1} = L_t^{1/2} Exp( (beta / S) sum_s Log(L_t^{-1/2} L^s L_t^{-1/2}) ) L_t^{1/2}

starting from ``L_0 = sum_s L^s``. Set ``normalize=False`` in the config to
drop the ``1/S`` factor (the flow then no longer stops at the mean for S > 1).
"""

from dataclasses import dataclass

import numpy as np

from .graph import default_shift, shifted_laplacian
from .spd import SpdMatrix, as_spd, riemann_dist, spd_exp, symmetrize

METHODS = ("geometric", "arithmetic")


@dataclass(frozen=True)
class AggregationConfig:
    """Settings for :func:`geometric_mean` and :func:`aggregate_graph`.

    The defaults (one step with ``beta=1``) are the cheap practical setting.
    Use ``max_iterations=100, convergence_tol=1e-8`` to run the flow to
    convergence.
    """

    epsilon: float | None = None
    beta: float = 1.0
    max_iterations: int = 1
    convergence_tol: float = 1e-8
    normalize: bool = True

    def __post_init__(self):
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.convergence_tol > 0:
            raise ValueError(f"convergence_tol must be positive, got {self.convergence_tol}")


def _check_inputs(matrices):
    mats = [as_spd(A) for A in matrices]
    if not mats:
        raise ValueError("need at least one matrix to average")
    n = mats[0].dim
    for s, A in enumerate(mats):
        if A.dim != n:
            raise ValueError(f"matrix {s} has dimension {A.dim}, expected {n}")
    return mats


def arithmetic_mean(matrices):
    """Entrywise mean ``(1/S) sum_s L^s`` of SPD matrices."""
    mats = _check_inputs(matrices)
    return SpdMatrix(sum(A.array for A in mats) / len(mats))


def karcher_cost(L, matrices):
    """Sum of squared Riemannian distances from ``L`` to each matrix."""
    L = as_spd(L)
    return sum(riemann_dist(L, A) for A in matrices)


def karcher_step(current, matrices, beta=1.0, normalize=True):
    """One step of the Karcher flow from ``current``; returns an SpdMatrix."""
    current = as_spd(current)
    sq, isq = current.sqrt(), current.invsqrt()
    tangent = np.zeros((current.dim, current.dim))
    for A in matrices:
        M = SpdMatrix(symmetrize(isq @ A.array @ isq))
        tangent += (M.eigenvectors * np.log(M.eigenvalues)) @ M.eigenvectors.T
    scale = beta / len(matrices) if normalize else beta
    E = spd_exp(scale * symmetrize(tangent))
    return SpdMatrix(symmetrize(sq @ E.array @ sq))


def geometric_mean(matrices, cfg=None, callback=None):
    """Geometric (Karcher) mean of SPD matrices by Riemannian gradient flow.

    Parameters
    ----------
    matrices : sequence of SpdMatrix or array_like
        S >= 1 SPD matrices of equal dimension.
    cfg : AggregationConfig, optional
        Step size, iteration cap and tolerance. ``cfg.epsilon`` is unused here.
    callback : callable, optional
        Called as ``callback(t, L_t)`` for ``t = 0`` (the initial point) and
        after every step.

    Returns
    -------
    SpdMatrix
        The iterate at which the relative Frobenius change dropped below
        ``cfg.convergence_tol``, or the last one if the cap was hit.
    """
    cfg = cfg or AggregationConfig()
    mats = _check_inputs(matrices)
    current = SpdMatrix(sum(A.array for A in mats))
    if callback is not None:
        callback(0, current)
    for t in range(1, cfg.max_iterations + 1):
        nxt = karcher_step(current, mats, cfg.beta, cfg.normalize)
        change = np.linalg.norm(nxt.array - current.array) / np.linalg.norm(current.array)
        current = nxt
        if callback is not None:
            callback(t, current)
        if change < cfg.convergence_tol:
            break
    return current


def layer_matrices(graph, epsilon=None):
    """Shifted Laplacians of every layer (per-layer default shift if ``epsilon`` is None)."""
    out = []
    for L in graph.laplacians():
        eps = default_shift(L) if epsilon is None else epsilon
        out.append(shifted_laplacian(L, eps))
    return out


def aggregate_graph(graph, method="geometric", cfg=None):
    """Representative SPD matrix of a :class:`~mlcluster.graph.MultilayerGraph`."""
    cfg = cfg or AggregationConfig()
    if method not in METHODS:
        raise ValueError(f"unknown aggregation method {method!r}; choose from {METHODS}")
    mats = layer_matrices(graph, cfg.epsilon)
    if len(mats) == 1:
        return mats[0]
    if method == "arithmetic":
        return arithmetic_mean(mats)
    return geometric_mean(mats, cfg)


def save_matrix_csv(A, path):
    """Write a dense matrix as N rows of comma-separated values."""
    np.savetxt(path, np.asarray(A), delimiter=",", fmt="%.17g")
