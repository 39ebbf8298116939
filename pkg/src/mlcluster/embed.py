"""Spectral embedding network with an implicit orthogonality constraint.

A dense PReLU network ``f`` maps node features ``X`` (N x M) to ``Y = f(X)``
(N x K). With ``R = cholesky(Y^T Y)`` (lower triangular), the training
objective is ::

    J = Tr(R^{-1} Y^T L Y R^{-T}) = Tr((Y^T Y)^{-1} Y^T L Y)

so the whitened output ``Q = Y R^{-T}`` is semi-orthogonal by construction
and J is the trace of ``Q^T L Q``. Its Jacobian with respect to ``Y`` is ::

    dJ/dY = 2 (L Y Dbar - Y Dbar Y^T L Y Dbar),   Dbar = R^{-T} R^{-1}

which is pulled back through the network by :func:`backprop` and fed to an
AMSGrad optimizer.
"""

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import RankDeficiencyError, TrainingError

logger = logging.getLogger(__name__)

FORMAT_NAME = "mlcluster-embedder"
FORMAT_VERSION = 1


class EmbedderModel:
    """Dense network ``R^M -> R^K`` with PReLU on every hidden layer.

    All parameters live in one flat vector :attr:`theta`; :attr:`weights`,
    :attr:`biases` and :attr:`slopes` are views into it, so an in-place
    update of ``theta`` is an update of the network. Layout: for each dense
    layer its weight matrix (fan_in x fan_out, row-major) then its bias,
    followed by one PReLU slope per hidden layer.

    Parameters
    ----------
    layer_sizes : sequence of int
        ``(M, h_1, ..., h_p, K)``. A two-element tuple is a single linear layer.
    theta : array_like, optional
        Flat parameter vector; zeros if omitted.
    """

    def __init__(self, layer_sizes, theta=None):
        sizes = tuple(int(s) for s in layer_sizes)
        if len(sizes) < 2 or min(sizes) < 1:
            raise ValueError(f"invalid layer sizes {sizes}")
        self.layer_sizes = sizes
        count = sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:])) + len(sizes) - 2
        if theta is None:
            theta = np.zeros(count)
        theta = np.array(theta, dtype=np.float64)
        if theta.shape != (count,):
            raise ValueError(f"expected {count} parameters, got shape {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("parameters must be finite")
        self.theta = theta
        self.weights, self.biases = [], []
        pos = 0
        for a, b in zip(sizes[:-1], sizes[1:]):
            self.weights.append(theta[pos : pos + a * b].reshape(a, b))
            pos += a * b
            self.biases.append(theta[pos : pos + b])
            pos += b
        self.slopes = theta[pos:]

    @classmethod
    def initialize(cls, layer_sizes, seed=0, slope=0.25):
        """Uniform fan-in initialization: ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
        model = cls(layer_sizes)
        rng = np.random.default_rng(seed)
        for W, b in zip(model.weights, model.biases):
            bound = 1.0 / math.sqrt(W.shape[0])
            W[...] = rng.uniform(-bound, bound, size=W.shape)
            b[...] = rng.uniform(-bound, bound, size=b.shape)
        model.slopes[...] = slope
        return model

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]

    @property
    def param_count(self):
        return self.theta.size

    def copy(self):
        return EmbedderModel(self.layer_sizes, self.theta.copy())

    def __repr__(self):
        return f"EmbedderModel(layer_sizes={self.layer_sizes}, param_count={self.param_count})"


def _check_input(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise ValueError(
            f"features have {X.shape[-1]} columns, model expects M={model.input_dim}"
        )
    return X


def _forward(model, X):
    # cache per hidden layer: (min(z, 0), dh/dz)
    acts, pre = [X], []
    h = X
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W
        z += b
        if i < last:
            neg = np.minimum(z, 0.0)
            deriv = np.multiply(z > 0, 1.0 - model.slopes[i])
            deriv += model.slopes[i]
            h = z * deriv
            pre.append((neg, deriv))
            acts.append(h)
        else:
            h = z
    return h, (acts, pre)


def forward(model, X):
    """Row-wise network output ``Y = f(X)``, shape (N, K)."""
    return _forward(model, _check_input(model, X))[0]


def backprop(model, X, upstream, cache=None):
    """Gradient of ``<upstream, f(X)>`` with respect to ``model.theta``.

    Parameters
    ----------
    model : EmbedderModel
    X : array_like, shape (N, M)
    upstream : array_like, shape (N, K)
        Derivative of the scalar objective with respect to ``f(X)``.
    cache : tuple, optional
        Activations from a previous forward pass on the same ``X``.

    Returns
    -------
    ndarray, shape (param_count,)
        Laid out like ``model.theta``.
    """
    X = _check_input(model, X)
    G = np.asarray(upstream, dtype=np.float64)
    if G.shape != (X.shape[0], model.output_dim):
        raise ValueError(f"upstream must have shape {(X.shape[0], model.output_dim)}, got {G.shape}")
    if cache is None:
        _, cache = _forward(model, X)
    acts, pre = cache

    grad = EmbedderModel(model.layer_sizes)
    for i in range(len(model.weights) - 1, -1, -1):
        grad.weights[i][...] = acts[i].T @ G
        grad.biases[i][...] = G.sum(axis=0)
        if i == 0:
            break
        G = G @ model.weights[i].T
        neg, deriv = pre[i - 1]
        grad.slopes[i - 1] = np.vdot(G, neg)
        G *= deriv
    return grad.theta


def cholesky_gram(Y, jitter=1e-10, escalations=3):
    """Lower Cholesky factor of ``Y^T Y``, with diagonal jitter on failure.

    On failure the Gram matrix is retried with ``jitter * trace / K`` added to
    its diagonal, multiplying the jitter by 10 up to ``escalations`` times.

    Raises
    ------
    RankDeficiencyError
        If every attempt fails.
    """
    P = Y.T @ Y
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError:
        pass
    k = P.shape[0]
    scale = np.trace(P) / k if np.trace(P) > 0 else 1.0
    for i in range(escalations + 1):
        shift = jitter * 10**i * scale
        try:
            R = np.linalg.cholesky(P + shift * np.eye(k))
        except np.linalg.LinAlgError:
            continue
        logger.debug("Gram matrix factored with jitter %.3e", shift)
        return R
    smallest = float(np.linalg.eigvalsh(P)[0])
    raise RankDeficiencyError(
        f"embedding Gram matrix is rank deficient (smallest eigenvalue {smallest:.3e})",
        smallest_eigenvalue=smallest,
    )


def whiten(Y, R):
    """Semi-orthogonal embedding ``Y R^{-T}``."""
    return solve_triangular(R, np.asarray(Y, dtype=np.float64).T, lower=True).T


def loss(Y, L, jitter=1e-10):
    """Implicitly orthogonal spectral loss.

    Returns
    -------
    J : float
        ``Tr(R^{-1} Y^T L Y R^{-T})``.
    R : ndarray, shape (K, K)
        Lower Cholesky factor of ``Y^T Y`` (possibly jittered).
    """
    Y = np.asarray(Y, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] < Y.shape[1]:
        raise ValueError(f"Y must be N x K with N >= K, got shape {Y.shape}")
    if L.shape != (Y.shape[0], Y.shape[0]):
        raise ValueError(f"L has shape {L.shape}, expected {(Y.shape[0],) * 2}")
    R = cholesky_gram(Y, jitter)
    Q = whiten(Y, R)
    return float(np.sum(Q * (L @ Q))), R


def loss_jacobian(Y, L, R, LY=None):
    """Closed-form ``dJ/dY = 2 (L Y Dbar - Y Dbar Y^T L Y Dbar)`` with ``Dbar = (R R^T)^{-1}``."""
    Y = np.asarray(Y, dtype=np.float64)
    if LY is None:
        LY = np.asarray(L, dtype=np.float64) @ Y
    Dbar = cho_solve((R, True), np.eye(R.shape[0]))
    LYD = LY @ Dbar
    return 2.0 * (LYD - Y @ (Dbar @ (Y.T @ LYD)))


def _phi(M):
    """Lower triangle with halved diagonal: ``M - triu(M) + diag(M)/2``."""
    return np.tril(M, -1) + 0.5 * np.diag(np.diag(M))


def loss_jacobian_stepwise(Y, L, R):
    """``dJ/dY`` by reverse-mode differentiation through each primitive.

    Forward chain: ``P = Y^T Y``, ``R = chol(P)``, ``A = R^{-1}``,
    ``D = Y^T L Y``, ``C = A D A^T``, ``J = Tr(C)``. Each adjoint below is the
    textbook rule for that primitive; the Cholesky adjoint is
    ``Pbar = sym(R^{-T} phi(R^T Rbar) R^{-1})``. Kept separate from
    :func:`loss_jacobian` so the two can check each other.
    """
    Y = np.asarray(Y, dtype=np.float64)
    L = np.asarray(L, dtype=np.float64)
    k = R.shape[0]
    A = solve_triangular(R, np.eye(k), lower=True)
    D = Y.T @ L @ Y
    # J = Tr(C): Cbar = I
    Abar = 2.0 * A @ D
    Dbar = A.T @ A
    Ytilde = 2.0 * L @ Y @ Dbar
    # A = R^{-1}
    Rbar = -A.T @ Abar @ A.T
    # R = chol(P)
    S = A.T @ _phi(R.T @ Rbar) @ A
    Pbar = 0.5 * (S + S.T)
    # P = Y^T Y
    return 2.0 * Y @ Pbar + Ytilde


def spectral_objective(model, X, L, jitter=1e-10):
    """Loss, Cholesky factor and full parameter gradient in one pass."""
    X = _check_input(model, X)
    L = np.asarray(L, dtype=np.float64)
    Y, cache = _forward(model, X)
    R = cholesky_gram(Y, jitter)
    LY = L @ Y
    Dbar = cho_solve((R, True), np.eye(R.shape[0]))
    J = float(np.sum(Dbar * (Y.T @ LY)))
    Ybar = loss_jacobian(Y, L, R, LY=LY)
    return J, R, backprop(model, X, Ybar, cache)


class AMSGrad:
    """Adam with a non-decreasing second-moment normalizer.

    Bias-corrected form: ``m`` and ``v`` are exponential moving averages of
    the gradient and its square, ``vmax = max(vmax, v)``, and the step is
    ``lr / (1 - b1^t) * m / (sqrt(vmax / (1 - b2^t)) + eps)``.
    """

    def __init__(self, size, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.vmax = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        """Update ``theta`` in place."""
        self.t += 1
        self.m *= self.beta1
        self.m += (1.0 - self.beta1) * grad
        self.v *= self.beta2
        self.v += (1.0 - self.beta2) * grad * grad
        np.maximum(self.vmax, self.v, out=self.vmax)
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        denom = np.sqrt(self.vmax / bc2) + self.eps
        theta -= (self.lr / bc1) * self.m / denom


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    amsgrad_beta1: float = 0.9
    amsgrad_beta2: float = 0.999
    amsgrad_eps: float = 1e-8
    max_steps: int = 2000
    loss_plateau_tol: float = 1e-7
    plateau_window: int = 50
    seed: int = 0
    cholesky_jitter: float = 1e-10

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.max_steps < 1:
            raise ValueError(f"max_steps must be >= 1, got {self.max_steps}")


@dataclass
class EmbeddingResult:
    """Output of :func:`train`.

    ``embedding`` (``Y R^{-T}``) is the canonical representation for clustering.
    """

    raw_output: np.ndarray
    cholesky_factor: np.ndarray
    embedding: np.ndarray
    final_loss: float
    losses: list = field(default_factory=list)
    steps: int = 0


def train(model, X, L, cfg=None, callback=None):
    """Full-batch AMSGrad minimization of the spectral loss.

    Parameters
    ----------
    model : EmbedderModel
        Trained in place.
    X : array_like, shape (N, M)
    L : SpdMatrix or array_like, shape (N, N)
        Aggregated Laplacian.
    cfg : TrainConfig, optional
    callback : callable, optional
        ``callback(step, loss)`` after each step's loss evaluation.

    Returns
    -------
    EmbeddingResult
        Evaluated at the final parameters.

    Raises
    ------
    TrainingError
        If the loss or the parameters become non-finite.
    RankDeficiencyError
        If the output Gram matrix cannot be factored.
    """
    cfg = cfg or TrainConfig()
    X = _check_input(model, X)
    L = np.asarray(L, dtype=np.float64)
    if L.shape != (X.shape[0], X.shape[0]):
        raise ValueError(f"L has shape {L.shape}, features have {X.shape[0]} rows")
    opt = AMSGrad(
        model.param_count,
        lr=cfg.learning_rate,
        beta1=cfg.amsgrad_beta1,
        beta2=cfg.amsgrad_beta2,
        eps=cfg.amsgrad_eps,
    )
    losses = []
    w = cfg.plateau_window
    for step in range(cfg.max_steps):
        J, _, grad = spectral_objective(model, X, L, cfg.cholesky_jitter)
        if not math.isfinite(J) or not np.all(np.isfinite(grad)):
            raise TrainingError(f"loss became non-finite at step {step}", step=step)
        losses.append(J)
        if callback is not None:
            callback(step, J)
        if len(losses) > w and abs(losses[-1 - w] - J) <= cfg.loss_plateau_tol * abs(losses[-1 - w]):
            logger.info("loss plateau at step %d (J=%.6g)", step, J)
            break
        opt.step(model.theta, grad)
        if not np.all(np.isfinite(model.theta)):
            raise TrainingError(f"parameters became non-finite at step {step}", step=step)

    Y = forward(model, X)
    J, R = loss(Y, L, cfg.cholesky_jitter)
    if not math.isfinite(J):
        raise TrainingError("final loss is non-finite", step=len(losses))
    return EmbeddingResult(
        raw_output=Y,
        cholesky_factor=R,
        embedding=whiten(Y, R),
        final_loss=J,
        losses=losses,
        steps=len(losses),
    )


def embed_new(model, R, X):
    """Whitened embedding of new feature rows with a training-time factor ``R``."""
    return whiten(forward(model, X), R)


def model_to_dict(model, R=None):
    """JSON-ready document for a model and its training-time Cholesky factor.

    Fields: ``format``, ``version``, ``layer_sizes``, ``weights`` (per layer,
    fan_in x fan_out nested lists), ``biases``, ``prelu_slopes`` and
    ``cholesky_factor`` (K x K lower triangular, or null).
    """
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "prelu_slopes": model.slopes.tolist(),
        "cholesky_factor": None if R is None else np.asarray(R).tolist(),
    }


def model_from_dict(doc):
    """Inverse of :func:`model_to_dict`; returns ``(model, R)``."""
    if doc.get("format") != FORMAT_NAME:
        raise ValueError(f"not a {FORMAT_NAME} document")
    if doc.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model version {doc.get('version')}")
    model = EmbedderModel(doc["layer_sizes"])
    if len(doc["weights"]) != len(model.weights) or len(doc["biases"]) != len(model.biases):
        raise ValueError("layer count does not match layer_sizes")
    pairs = zip(
        model.weights + model.biases + [model.slopes],
        doc["weights"] + doc["biases"] + [doc["prelu_slopes"]],
    )
    for dst, src in pairs:
        src = np.asarray(src, dtype=np.float64)
        if src.shape != dst.shape:
            raise ValueError(f"parameter shape mismatch: expected {dst.shape}, got {src.shape}")
        dst[...] = src
    if not np.all(np.isfinite(model.theta)):
        raise ValueError("model parameters must be finite")
    R = doc.get("cholesky_factor")
    if R is not None:
        R = np.asarray(R, dtype=np.float64)
        k = model.output_dim
        if R.shape != (k, k):
            raise ValueError(f"cholesky_factor must be {k} x {k}, got {R.shape}")
    return model, R


def save_model(model, R, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model, R), fh)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
