"""Interpolative decompositions from column-pivoted Householder QR.

For a matrix ``Z`` (samples x neurons) the decomposition picks ``k`` columns
``I`` and an interpolation matrix ``D`` (k x m) with ``Z ~= Z[:, I] @ D``.
Truncation is decided on the Frobenius norm of the trailing QR block, which
equals the reconstruction residual exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# relative drop in a downdated column norm beyond which it is recomputed
DOWNDATE_GUARD = 1e-6


class DegenerateMatrixError(ValueError):
    """The matrix is identically zero, so a relative tolerance is meaningless."""


class RankInconsistencyError(ArithmeticError):
    """A zero pivot was hit inside the retained block."""


@dataclass(frozen=True)
class InterpDecomp:
    index_set: np.ndarray
    D: np.ndarray
    residual_rel: float

    @property
    def k(self) -> int:
        return int(self.index_set.size)

    def reconstruct(self, Z: np.ndarray) -> np.ndarray:
        return Z[:, self.index_set] @ self.D


def solve_interpolation(R11: np.ndarray, R12: np.ndarray) -> np.ndarray:
    """Back-substitute ``R11 @ T = R12`` for upper-triangular `R11`."""
    R11 = np.asarray(R11, dtype=np.float64)
    R12 = np.asarray(R12, dtype=np.float64)
    k = R11.shape[0]
    if R11.shape != (k, k) or R12.shape[0] != k:
        raise ValueError(f"incompatible shapes {R11.shape} and {R12.shape}")
    diag = np.diag(R11)
    if np.any(diag == 0.0):
        raise RankInconsistencyError("zero on the diagonal of R11")
    T = np.empty_like(R12)
    for i in range(k - 1, -1, -1):
        T[i] = (R12[i] - R11[i, i + 1:] @ T[i + 1:]) / diag[i]
    return T


def pivoted_householder(A: np.ndarray, stop=None):
    """In-place column-pivoted Householder QR of `A`.

    Runs until ``stop(j, A)`` returns True before step ``j`` (never before the
    first step) or until ``min(A.shape)`` steps are done. Returns the number of
    steps taken and the column permutation. On return ``A[:j, :]`` holds the
    leading rows of R and ``A[j:, j:]`` the trailing block.
    """
    l, m = A.shape
    perm = np.arange(m)
    norms2 = np.einsum("ij,ij->j", A, A)
    ref2 = norms2.copy()
    steps = min(l, m)
    for j in range(steps):
        if j > 0 and stop is not None and stop(j, A, norms2):
            return j, perm
        cand = norms2[j:]
        ties = np.flatnonzero(cand == cand.max()) + j
        p = ties[np.argmin(perm[ties])]
        if p != j:
            A[:, [j, p]] = A[:, [p, j]]
            perm[[j, p]] = perm[[p, j]]
            norms2[[j, p]] = norms2[[p, j]]
            ref2[[j, p]] = ref2[[p, j]]

        x = A[j:, j]
        alpha = np.linalg.norm(x)
        if alpha > 0.0:
            v = x.copy()
            v[0] += alpha if x[0] >= 0 else -alpha
            beta = 2.0 / (v @ v)
            A[j:, j:] -= np.outer(beta * v, v @ A[j:, j:])
            A[j + 1:, j] = 0.0

        rest = slice(j + 1, m)
        norms2[rest] -= A[j, rest] ** 2
        stale = np.flatnonzero(norms2[rest] <= DOWNDATE_GUARD * ref2[rest]) + j + 1
        if stale.size:
            fresh = np.einsum("ij,ij->j", A[j + 1:, stale], A[j + 1:, stale])
            norms2[stale] = fresh
            ref2[stale] = fresh
    return steps, perm


def interp_decomp(Z: np.ndarray, eps: float) -> InterpDecomp:
    """Column interpolative decomposition of `Z` at relative tolerance `eps`.

    Parameters
    ----------
    Z : (l, m) array
        Activation matrix, one column per neuron.
    eps : float
        Relative Frobenius tolerance. At least one column is always kept, so
        ``eps >= 1`` gives ``k = 1``.

    Returns
    -------
    InterpDecomp
        ``k`` is the shortest pivot prefix with trailing block norm at most
        ``eps * ||Z||_F``; ``residual_rel`` is that norm divided by ``||Z||_F``.

    Raises
    ------
    DegenerateMatrixError
        If `Z` is identically zero.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    A = np.array(Z, dtype=np.float64)
    if A.ndim != 2:
        raise ValueError(f"expected a 2D matrix, got shape {A.shape}")
    l, m = A.shape
    total = np.linalg.norm(A)
    if total == 0.0:
        raise DegenerateMatrixError("cannot decompose an all-zero matrix")
    tol = eps * total

    def small_enough(j, A, norms2):
        # downdated norms screen, the exact trailing block decides
        if norms2[j:].sum() > tol * tol * (1.0 + 1e-8):
            return False
        return np.linalg.norm(A[j:, j:]) <= tol

    k, perm = pivoted_householder(A, small_enough)
    residual = np.linalg.norm(A[k:, k:]) / total if k < m else 0.0

    T = solve_interpolation(np.triu(A[:k, :k]), A[:k, k:])
    D = np.zeros((k, m))
    D[:, perm[:k]] = np.eye(k)
    D[:, perm[k:]] = T
    return InterpDecomp(perm[:k].copy(), D, float(residual))


def relative_residual(Z: np.ndarray, dec: InterpDecomp) -> float:
    """Recompute ``||Z - Z[:, I] D||_F / ||Z||_F`` from scratch."""
    Z = np.asarray(Z, dtype=np.float64)
    return float(np.linalg.norm(Z - dec.reconstruct(Z)) / np.linalg.norm(Z))
