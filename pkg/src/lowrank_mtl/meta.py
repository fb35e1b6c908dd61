"""Transfer of a learned subspace to a previously unseen task."""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .matops import sin_principal_angle, svd

__all__ = [
    "SubspaceAmbiguityWarning",
    "TransferResult",
    "extract_subspace",
    "transfer_fit",
    "task_spectrum_nu",
    "subspace_angle_bound",
]


class SubspaceAmbiguityWarning(UserWarning):
    """The r-th and (r+1)-th singular values tie, so the rank-r span is not unique."""


@dataclass
class TransferResult:
    Btilde: np.ndarray
    alpha_new: np.ndarray
    theta_hat: np.ndarray
    sin_theta: Optional[float] = None
    rank_deficient: bool = False


def extract_subspace(Mhat, r):
    """Orthonormal d x r basis of the best rank-r approximation of `Mhat`.

    Emits :class:`SubspaceAmbiguityWarning` when singular values r and r+1
    agree to 1e-12; an arbitrary basis from the SVD is still returned.
    """
    Mhat = np.asarray(Mhat, dtype=float)
    if r < 1 or r > min(Mhat.shape):
        raise ValueError(f"r={r} must lie in [1, {min(Mhat.shape)}]")
    U, S, _ = svd(Mhat)
    if r < S.size and abs(S[r - 1] - S[r]) <= 1e-12:
        warnings.warn(
            f"singular values {r} and {r + 1} tie at {S[r]:.3g}",
            SubspaceAmbiguityWarning,
            stacklevel=2,
        )
    return U[:, :r].copy()


def transfer_fit(Btilde, new_task, B_true=None):
    """Least squares for a new task inside ``span(Btilde)``.

    Solves ``min_a sum_i (y_i - <Btilde a, x_i>)^2`` (minimum-norm when the
    projected design is rank deficient) and returns ``theta_hat = Btilde a``.
    If `B_true` is given, the sine of the largest principal angle between it
    and `Btilde` is filled in.
    """
    Btilde = np.asarray(Btilde, dtype=float)
    X = np.asarray(new_task.X, dtype=float)
    if X.shape[1] != Btilde.shape[0]:
        raise ValueError(f"task has {X.shape[1]} features, basis has {Btilde.shape[0]} rows")
    A = X @ Btilde
    alpha, _, rank, _ = np.linalg.lstsq(A, new_task.y, rcond=1e-10)
    sin_theta = None if B_true is None else sin_principal_angle(B_true, Btilde)
    return TransferResult(
        Btilde, alpha, Btilde @ alpha, sin_theta, rank_deficient=rank < Btilde.shape[1]
    )


def task_spectrum_nu(Mstar, r):
    """``r * lambda_r(M* M*^T / T)``, the task-richness constant of the angle bound."""
    Mstar = np.asarray(Mstar, dtype=float)
    s = np.linalg.svd(Mstar, compute_uv=False)
    if r > s.size:
        return 0.0
    return float(r * s[r - 1] ** 2 / Mstar.shape[1])


def subspace_angle_bound(err_frob, r, T, nu):
    """Upper bound on the sine of the largest angle between the true and rank-r subspaces.

    ``sqrt(min(1, 4 r err^2 / (T nu)))`` where `err_frob` is the Frobenius
    distance between the estimate and the true parameter matrix.
    """
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    return float(np.sqrt(min(1.0, 4.0 * r * err_frob**2 / (T * nu))))
