"""Dense linear-algebra primitives shared by the estimators.

Everything here is a pure function of its inputs.
"""

from collections import namedtuple

import numpy as np
import scipy.linalg

__all__ = [
    "DegenerateSubspaceError",
    "SvdFactors",
    "svd",
    "svt",
    "nuclear_norm",
    "frobenius_norm",
    "spectral_norm",
    "orthonormalize",
    "sin_principal_angle",
    "rank_r_truncate",
]

SvdFactors = namedtuple("SvdFactors", ["U", "S", "V"])


class DegenerateSubspaceError(ValueError):
    """A basis handed to a subspace routine does not have full column rank."""


def _as_matrix(A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A.reshape(-1, 1)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {A.shape}")
    return A


def svd(A, k="full"):
    """Thin SVD of `A`, optionally truncated to the top `k` triplets.

    Parameters
    ----------
    A : array_like, shape (n, p)
    k : int or "full"
        Number of leading singular triplets to keep.

    Returns
    -------
    SvdFactors
        ``U`` (n, k), ``S`` (k,) nonincreasing, ``V`` (p, k) so that
        ``A ~= U @ diag(S) @ V.T``.
    """
    A = _as_matrix(A)
    if A.size == 0:
        raise ValueError("svd of an empty matrix")
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    if k != "full":
        k = int(k)
        if k < 1 or k > min(A.shape):
            raise ValueError(f"k={k} must lie in [1, {min(A.shape)}]")
        U, S, Vt = U[:, :k], S[:k], Vt[:k]
    return SvdFactors(U, S, Vt.T)


def _svt(A, threshold):
    # returns the thresholded matrix and its singular values
    U, S, Vt = np.linalg.svd(A, full_matrices=False)
    S = np.maximum(S - threshold, 0.0)
    keep = S > 0
    return (U[:, keep] * S[keep]) @ Vt[keep], S


def svt(A, threshold):
    """Singular value soft-thresholding, the proximal map of ``threshold * ||.||_*``."""
    if threshold < 0:
        raise ValueError(f"threshold must be nonnegative, got {threshold}")
    A = _as_matrix(A)
    if threshold == 0:
        return A.copy()
    return _svt(A, threshold)[0]


def nuclear_norm(A):
    """Sum of singular values."""
    A = _as_matrix(A)
    if A.size == 0:
        return 0.0
    return float(np.linalg.svd(A, compute_uv=False).sum())


def frobenius_norm(A):
    return float(np.linalg.norm(np.asarray(A, dtype=float)))


def spectral_norm(A, tol=1e-10, max_iter=1000):
    """Largest singular value by power iteration on ``A.T @ A``.

    `A` may also be a stack of matrices with shape (..., n, p); the
    iteration is then run on every matrix at once and an array of norms
    is returned.

    The start vector is drawn from a fixed seed so the result is a
    deterministic function of `A`.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim < 2:
        A = _as_matrix(A)
    stacked = A.ndim > 2
    if not stacked:
        A = A[None]
    batch = A.shape[:-2]
    p = A.shape[-1]
    if A.size == 0:
        out = np.zeros(batch)
        return out if stacked else float(out[0])

    v = np.random.default_rng(0).standard_normal(p) + 1.0
    v = np.broadcast_to(v / np.linalg.norm(v), batch + (p,)).copy()
    est = np.zeros(batch)
    for _ in range(max_iter):
        Av = np.einsum("...ij,...j->...i", A, v)
        w = np.einsum("...ij,...i->...j", A, Av)
        wn = np.linalg.norm(w, axis=-1)
        # Rayleigh quotient of A^T A at v, i.e. ||A v||^2
        new = np.einsum("...i,...i->...", Av, Av)
        zero = wn == 0
        v = np.where(zero[..., None], v, w / np.where(zero, 1.0, wn)[..., None])
        done = np.abs(new - est) <= tol * np.maximum(new, np.finfo(float).tiny)
        est = new
        if np.all(done | zero):
            break
    # one last Rayleigh quotient at the converged direction
    Av = np.einsum("...ij,...j->...i", A, v)
    est = np.maximum(est, np.einsum("...i,...i->...", Av, Av))
    out = np.sqrt(est)
    return out if stacked else float(out[0])


def orthonormalize(B, rtol=1e-10):
    """Orthonormal basis of the column span of `B` via pivoted QR.

    Raises
    ------
    DegenerateSubspaceError
        If the numerical rank (relative tolerance `rtol` against the
        largest diagonal entry of R) is below the column count.
    """
    B = _as_matrix(B)
    if B.shape[1] > B.shape[0]:
        raise DegenerateSubspaceError(
            f"{B.shape[1]} columns cannot be independent in dimension {B.shape[0]}"
        )
    Q, R, _ = scipy.linalg.qr(B, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0 or np.any(diag < rtol * diag[0]):
        rank = int(np.sum(diag > rtol * diag[0])) if diag.size and diag[0] else 0
        raise DegenerateSubspaceError(
            f"basis has numerical rank {rank} < {B.shape[1]} columns"
        )
    return Q


def sin_principal_angle(B1, B2):
    """Sine of the largest principal angle between ``span(B1)`` and ``span(B2)``.

    Columns need not be orthonormal. When the two spans have different
    dimensions the angles are the ``min(r1, r2)`` canonical ones, i.e. the
    smaller subspace is compared against the larger.
    """
    Q1 = orthonormalize(B1)
    Q2 = orthonormalize(B2)
    if Q1.shape[0] != Q2.shape[0]:
        raise ValueError(f"ambient dimensions differ: {Q1.shape[0]} vs {Q2.shape[0]}")
    if Q1.shape[1] < Q2.shape[1]:
        Q1, Q2 = Q2, Q1
    # residual of the smaller basis off the larger span; its top singular
    # value is the sine, which avoids the cancellation in sqrt(1 - cos^2)
    resid = Q2 - Q1 @ (Q1.T @ Q2)
    s = np.linalg.svd(resid, compute_uv=False)
    return float(np.clip(s[0], 0.0, 1.0))


def rank_r_truncate(A, r):
    """Best rank-`r` approximation of `A` in Frobenius norm."""
    A = _as_matrix(A)
    if r < 1 or r > min(A.shape):
        raise ValueError(f"r={r} must lie in [1, {min(A.shape)}]")
    U, S, V = svd(A, r)
    return (U * S) @ V.T
