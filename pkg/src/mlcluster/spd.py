"""Symmetric-matrix calculus on the SPD cone.

Every matrix function here goes through one symmetric eigendecomposition,
``A = V diag(w) V^T``, after symmetrizing the input as ``(A + A^T) / 2``.
:class:`SpdMatrix` certifies positive definiteness at construction and keeps
its decomposition, so logarithms, square roots and inverse square roots of
the same matrix never re-factor it.
"""

import numpy as np

from .errors import NumericalError

#: Relative Frobenius asymmetry above which an input is rejected outright.
SYMMETRY_TOL = 1e-8

#: Largest eigenvalue accepted by :func:`spd_exp` before exp() overflows.
EXP_MAX_EIGENVALUE = 700.0


def symmetrize(A):
    """Return ``(A + A^T) / 2`` as a float64 array."""
    A = np.asarray(A, dtype=np.float64)
    return (A + A.T) / 2


def _check_square(A, name="matrix"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError(f"{name} has non-finite entries")
    return A


def _check_symmetric(A, name="matrix"):
    A = _check_square(A, name)
    norm = np.linalg.norm(A)
    if norm > 0 and np.linalg.norm(A - A.T) > SYMMETRY_TOL * norm:
        raise ValueError(f"{name} is not symmetric")
    return symmetrize(A)


def sym_eig(A):
    """Eigendecomposition of a symmetric matrix.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix. It is symmetrized before decomposition.

    Returns
    -------
    w : ndarray, shape (n,)
        Eigenvalues in ascending order.
    V : ndarray, shape (n, n)
        Orthonormal eigenvectors, ``A = V @ diag(w) @ V.T``.

    Raises
    ------
    NumericalError
        If the eigensolver does not converge.
    """
    A = _check_symmetric(A)
    try:
        w, V = np.linalg.eigh(A)
    except np.linalg.LinAlgError as exc:
        diag = np.diag(A)
        raise NumericalError(
            f"symmetric eigensolver failed: {exc}",
            shape=A.shape,
            frobenius_norm=float(np.linalg.norm(A)),
            diagonal_range=(float(diag.min()), float(diag.max())),
        ) from exc
    return w, V


def _from_eig(w, V, fn):
    return symmetrize((V * fn(w)) @ V.T)


class SpdMatrix:
    """A certified symmetric positive-definite matrix.

    The entries are symmetrized on construction and the smallest eigenvalue
    must be strictly positive. Instances are read-only.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Candidate matrix.

    Raises
    ------
    ValueError
        If ``A`` is not square, not symmetric, or not positive definite.
    """

    __slots__ = ("_a", "_w", "_v")

    def __init__(self, A):
        if isinstance(A, SpdMatrix):
            self._a, self._w, self._v = A._a, A._w, A._v
            return
        A = _check_symmetric(A, "SPD candidate")
        w, V = sym_eig(A)
        if not w[0] > 0:
            raise ValueError(
                f"matrix is not positive definite (smallest eigenvalue {w[0]:.3e})"
            )
        for arr in (A, w, V):
            arr.setflags(write=False)
        self._a, self._w, self._v = A, w, V

    @property
    def array(self):
        """The matrix entries (read-only view)."""
        return self._a

    @property
    def dim(self):
        return self._a.shape[0]

    @property
    def eigenvalues(self):
        return self._w

    @property
    def eigenvectors(self):
        return self._v

    def power(self, p):
        """Return ``A^p`` as a plain symmetric array."""
        return _from_eig(self._w, self._v, lambda w: w**p)

    def sqrt(self):
        return _from_eig(self._w, self._v, np.sqrt)

    def invsqrt(self):
        return _from_eig(self._w, self._v, lambda w: 1.0 / np.sqrt(w))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._a.copy() if copy else self._a
        return self._a.astype(dtype)

    def __repr__(self):
        return f"SpdMatrix(dim={self.dim}, eig_range=({self._w[0]:.3e}, {self._w[-1]:.3e}))"


def as_spd(A):
    """Coerce ``A`` to :class:`SpdMatrix` (no-op if it already is one)."""
    return A if isinstance(A, SpdMatrix) else SpdMatrix(A)


def spd_log(A):
    """Principal logarithm ``V diag(log w) V^T`` of an SPD matrix."""
    A = as_spd(A)
    return _from_eig(A.eigenvalues, A.eigenvectors, np.log)


def spd_exp(S):
    """Exponential of a symmetric matrix; the result is SPD.

    Raises
    ------
    NumericalError
        If an eigenvalue exceeds :data:`EXP_MAX_EIGENVALUE` (exp() would overflow).
    """
    w, V = sym_eig(S)
    if w[-1] > EXP_MAX_EIGENVALUE:
        raise NumericalError(
            f"matrix exponential overflows (largest eigenvalue {w[-1]:.3e})",
            largest_eigenvalue=float(w[-1]),
        )
    return SpdMatrix(_from_eig(w, V, np.exp))


def riemann_dist(A, B):
    """Squared affine-invariant distance ``||Log(A^{-1/2} B A^{-1/2})||_F^2``.

    Parameters
    ----------
    A, B : SpdMatrix or array_like
        SPD matrices of equal dimension.

    Returns
    -------
    float
        Nonnegative squared distance; zero iff ``A == B``.
    """
    A, B = as_spd(A), as_spd(B)
    if A.dim != B.dim:
        raise ValueError(f"dimension mismatch: {A.dim} vs {B.dim}")
    isq = A.invsqrt()
    w, _ = sym_eig(isq @ B.array @ isq)
    if not w[0] > 0:
        raise NumericalError("congruence lost positive definiteness", smallest=float(w[0]))
    return float(np.sum(np.log(w) ** 2))
