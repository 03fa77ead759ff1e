"""LogEuclidean geometry on symmetric positive definite matrices.

All matrix functions go through the symmetric eigendecomposition: for
A = U diag(d) U', f(A) = U diag(f(d)) U'. Eigenvalues that underflow are
clamped at 1e-12 times the largest eigenvalue before taking logarithms;
each clamp increments a module-level counter so pipeline reports can
surface how often it happened.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import NumericError

# relative floor applied to eigenvalues before log/inverse-sqrt
EIG_CLAMP_REL = 1e-12

# shrinkage weight used on every covariance consumed downstream
SHRINKAGE_GAMMA = 1e-6

_clamp_events = 0


def clamp_event_count() -> int:
    """Number of eigenvalue clamps since the last reset (diagnostic)."""
    return _clamp_events


def reset_clamp_events() -> None:
    global _clamp_events
    _clamp_events = 0


def _record_clamps(n: int) -> None:
    global _clamp_events
    _clamp_events += n


def _as_matrix(m) -> np.ndarray:
    values = getattr(m, "values", m)
    return np.asarray(values, dtype=np.float64)


def _check_square_symmetric(a: np.ndarray, rel_tol: float = 1e-10) -> np.ndarray:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NumericError(f"expected a square matrix, got shape {a.shape}")
    scale = max(float(np.max(np.abs(a))), 1.0)
    asym = float(np.max(np.abs(a - a.T)))
    if asym > rel_tol * scale:
        raise NumericError(
            f"matrix is not symmetric (max asymmetry {asym:.3e} "
            f"over scale {scale:.3e})")
    return 0.5 * (a + a.T)


@dataclass(frozen=True)
class SpdMatrix:
    """A validated symmetric positive definite matrix.

    Construction symmetrizes the input and verifies that the smallest
    eigenvalue is strictly positive; violations raise NumericError.
    """

    values: np.ndarray

    def __post_init__(self):
        a = _check_square_symmetric(_as_matrix(self.values))
        w = np.linalg.eigvalsh(a)
        if w[0] <= 0.0:
            raise NumericError(
                f"matrix is not positive definite (smallest eigenvalue "
                f"{w[0]:.6e})")
        a.setflags(write=False)
        object.__setattr__(self, "values", a)

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class TangentVector:
    """A tangent-space feature vector of length n(n+1)/2."""

    values: np.ndarray
    reference_dim: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        n = self.reference_dim
        expected = n * (n + 1) // 2
        if v.ndim != 1 or v.size != expected:
            raise NumericError(
                f"tangent vector for dim {n} must have length {expected}, "
                f"got shape {v.shape}")


def _clamped_eigh(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition with the relative eigenvalue floor applied."""
    w, u = eigh(a)
    w_max = float(w[-1])
    if w_max <= 0.0:
        raise NumericError(
            f"largest eigenvalue is {w_max:.6e}; matrix has no positive part")
    floor = EIG_CLAMP_REL * w_max
    n_clamped = int(np.count_nonzero(w < floor))
    if n_clamped:
        _record_clamps(n_clamped)
        w = np.maximum(w, floor)
    return w, u


def matrix_log(m) -> np.ndarray:
    """Matrix logarithm of an SPD matrix.

    Parameters
    ----------
    m : SpdMatrix or ndarray
        Symmetric positive definite input. Eigenvalues below the relative
        floor are clamped (counted) rather than rejected; an input with no
        positive eigenvalue at all raises NumericError.

    Returns
    -------
    ndarray
        Real symmetric matrix log(m).
    """
    a = _check_square_symmetric(_as_matrix(m))
    w, u = _clamped_eigh(a)
    out = (u * np.log(w)) @ u.T
    return 0.5 * (out + out.T)


def matrix_exp(m) -> SpdMatrix:
    """Matrix exponential of a real symmetric matrix (always SPD)."""
    a = _check_square_symmetric(_as_matrix(m))
    w, u = eigh(a)
    out = (u * np.exp(w)) @ u.T
    return SpdMatrix(0.5 * (out + out.T))


def inv_sqrtm(m) -> np.ndarray:
    """Inverse matrix square root of an SPD matrix."""
    a = _check_square_symmetric(_as_matrix(m))
    w, u = _clamped_eigh(a)
    out = (u / np.sqrt(w)) @ u.T
    return 0.5 * (out + out.T)


def logeuclidean_distance(a, b) -> float:
    """LogEuclidean distance: Frobenius norm of log(a) - log(b).

    A true metric on SPD matrices: symmetric, zero only at equality, and
    satisfying the triangle inequality (it is the Euclidean distance
    between matrix logarithms).
    """
    return float(np.linalg.norm(matrix_log(a) - matrix_log(b)))


def logeuclidean_mean(mats) -> SpdMatrix:
    """LogEuclidean mean: exp of the average of matrix logs.

    Minimizes the sum of squared LogEuclidean distances to the inputs.
    """
    mats = list(mats)
    if not mats:
        raise ValueError("need at least one matrix")
    logs = [matrix_log(m) for m in mats]
    return matrix_exp(np.mean(logs, axis=0))


def vectorize_symmetric(sym: np.ndarray) -> np.ndarray:
    """Weighted upper-triangle vectorization of a symmetric matrix.

    Diagonal entries keep weight 1, strictly upper entries are scaled by
    sqrt(2), and the upper triangle is read in row-major order. With these
    weights the Euclidean norm of the vector equals the Frobenius norm of
    the matrix.
    """
    sym = np.asarray(sym, dtype=np.float64)
    n = sym.shape[0]
    idx = np.triu_indices(n)
    weights = (np.sqrt(2.0) * np.triu(np.ones((n, n)), 1) + np.eye(n))[idx]
    return weights * sym[idx]


@dataclass(frozen=True)
class ReferencePoint:
    """A reference SPD matrix with its cached inverse square root."""

    mean: SpdMatrix
    inv_sqrt: np.ndarray

    def __post_init__(self):
        s = _check_square_symmetric(np.asarray(self.inv_sqrt, dtype=np.float64))
        s.setflags(write=False)
        object.__setattr__(self, "inv_sqrt", s)
        n = self.mean.dim
        ident = s @ self.mean.values @ s
        err = float(np.max(np.abs(ident - np.eye(n))))
        if err > 1e-8:
            raise NumericError(
                f"inverse square root check failed (max deviation {err:.3e})")

    @classmethod
    def from_mean(cls, mean: SpdMatrix) -> "ReferencePoint":
        return cls(mean, inv_sqrtm(mean))

    @classmethod
    def from_covariances(cls, mats) -> "ReferencePoint":
        """Reference at the LogEuclidean mean of the given matrices."""
        return cls.from_mean(logeuclidean_mean(mats))

    @property
    def dim(self) -> int:
        return self.mean.dim


def tangent_map(ref: ReferencePoint, m) -> TangentVector:
    """Map an SPD matrix to the tangent space at a reference point.

    Whitens the input with the reference inverse square root, takes the
    matrix log, and vectorizes the upper triangle with sqrt(2) weighting.
    The map is an isometry around the reference: the vector norm equals
    the Frobenius norm of the whitened log.

    Parameters
    ----------
    ref : ReferencePoint
    m : SpdMatrix or ndarray
        SPD matrix of the same dimension as the reference.

    Returns
    -------
    TangentVector
        Feature vector of length n(n+1)/2.
    """
    a = _as_matrix(m)
    if a.shape != ref.mean.values.shape:
        raise ValueError(
            f"dimension mismatch: reference is {ref.dim}x{ref.dim}, "
            f"input is {a.shape}")
    whitened = ref.inv_sqrt @ a @ ref.inv_sqrt
    logw = matrix_log(whitened)
    return TangentVector(vectorize_symmetric(logw), ref.dim)


def shrink_covariance(sigma: np.ndarray, gamma: float = SHRINKAGE_GAMMA) -> np.ndarray:
    """Blend a covariance with a scaled identity: (1-g)*S + g*(tr(S)/n)*I."""
    sigma = np.asarray(sigma, dtype=np.float64)
    n = sigma.shape[0]
    return (1.0 - gamma) * sigma + gamma * (np.trace(sigma) / n) * np.eye(n)
