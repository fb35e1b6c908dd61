"""Estimators of the d x T parameter matrix of a multi-task linear model.

All of them work on the average squared loss

    f(M) = 1/(mT) * sum_{i,t} (y_i^t - <x_i^t, M[:, t]>)^2

and differ in how they impose low rank:

* :func:`fit_nuclear_fista`      -- f(M) + lam * ||M||_*, accelerated proximal gradient
* :func:`fit_nuclear_frankwolfe` -- f(M) subject to ||M||_* <= radius
* :func:`fit_burer_monteiro`     -- f(U V^T), gradient descent on the factors
* :func:`fit_altmin`             -- f(B alpha), alternating least squares
* :func:`fit_mom`                -- moment-based subspace with cross-fitted task halves
* :func:`fit_single_task`, :func:`fit_oracle` -- per-task least squares baselines
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import datagen
from .matops import _svt, orthonormalize, spectral_norm

__all__ = [
    "DivergenceError",
    "FitOptions",
    "FitResult",
    "LambdaRule",
    "smooth_loss",
    "smooth_grad",
    "objective_nuclear",
    "lambda_theory",
    "fit_nuclear_fista",
    "fit_nuclear_frankwolfe",
    "fit_burer_monteiro",
    "fit_altmin",
    "moment_matrix",
    "fit_mom",
    "fit_single_task",
    "fit_oracle",
    "select_lambda_cv",
    "default_lambda_grid",
]

PINV_RCOND = 1e-10


class DivergenceError(FloatingPointError):
    """Raised when a solver produces a non-finite objective.

    ``last_iterate`` holds the last parameter matrix with a finite objective.
    """

    def __init__(self, message, last_iterate=None, iterations=0):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.iterations = iterations


@dataclass
class FitOptions:
    max_iters: int = 5000
    rel_tol: float = 1e-8
    step_rule: str = "lipschitz"
    init_seed: int = 0

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")
        if self.step_rule not in ("lipschitz", "backtracking"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")


@dataclass
class FitResult:
    Mhat: np.ndarray
    iterations: int = 0
    final_objective: float = float("nan")
    converged: bool = True
    runtime_ms: float = 0.0
    subspace: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)


@dataclass
class LambdaRule:
    """How the nuclear-norm weight is chosen.

    ``theory`` uses :func:`lambda_theory`, ``fixed`` uses `value` and
    ``cross_validated`` grid-searches `grid` on a per-task holdout.
    """

    mode: str = "theory"
    value: Optional[float] = None
    grid: Optional[list] = None
    holdout_frac: float = 0.2

    def __post_init__(self):
        if self.mode not in ("theory", "fixed", "cross_validated"):
            raise ValueError(f"unknown lambda mode {self.mode!r}")
        if self.mode == "fixed" and (self.value is None or self.value < 0):
            raise ValueError("fixed lambda rule needs a nonnegative value")
        if self.mode == "cross_validated" and self.grid is not None and len(self.grid) == 0:
            raise ValueError("cross-validation grid is empty")
        if not 0 < self.holdout_frac < 1:
            raise ValueError("holdout_frac must lie in (0, 1)")


# ---------------------------------------------------------------------------
# loss pieces

def _check_shape(M, data):
    M = np.asarray(M, dtype=float)
    if M.shape != (data.d, data.T):
        raise ValueError(f"M has shape {M.shape}, data wants {(data.d, data.T)}")
    return M


def _predict(M, X):
    return np.einsum("tmd,dt->tm", X, M)


def smooth_loss(M, data):
    """Mean squared residual over all m*T samples."""
    M = _check_shape(M, data)
    r = data.y - _predict(M, data.X)
    return float(np.mean(r**2))


def smooth_grad(M, data):
    """Gradient of :func:`smooth_loss`; column t is ``2/(mT) X_t^T (X_t M_t - y_t)``."""
    M = _check_shape(M, data)
    r = _predict(M, data.X) - data.y
    return np.einsum("tmd,tm->dt", data.X, r) * (2.0 / r.size)


def objective_nuclear(M, data, lam):
    """Regularized objective ``f(M) + lam * ||M||_*``."""
    M = _check_shape(M, data)
    val = smooth_loss(M, data)
    if lam:
        val += lam * float(np.linalg.svd(M, compute_uv=False).sum())
    return val


def lambda_theory(d, m, T, sigma):
    """Default regularization weight ``sigma/sqrt(T) * sqrt((T + d^2/m) / (mT))``."""
    return sigma / math.sqrt(T) * math.sqrt((T + d * d / m) / (m * T))


def _batched_lstsq(A, b, rcond=PINV_RCOND):
    """Minimum-norm least squares for a stack of systems A[t] x = b[t].

    Singular values below ``rcond * s_max`` are discarded. Returns the
    solutions, shape (T, p), and the number of rank-deficient systems.
    """
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    smax = s[:, :1] if s.shape[1] else s
    keep = s > rcond * smax
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    coef = np.einsum("tmk,tm->tk", U, b) * s_inv
    sol = np.einsum("tkp,tk->tp", Vt, coef)
    deficient = int(np.sum(keep.sum(axis=1) < A.shape[2]))
    return sol, deficient


def _finish(res, t0):
    res.runtime_ms = (time.perf_counter() - t0) * 1e3
    return res


# ---------------------------------------------------------------------------
# trace-norm estimators

def fit_nuclear_fista(data, lam, opts=None):
    """Trace-norm regularized least squares by FISTA with function-value restart.

    The step is ``1/L`` with ``L = 2/(mT) * max_t ||X_t^T X_t||_2``, the
    Lipschitz constant of the smooth gradient, and the proximal step is
    singular value thresholding at ``lam / L``. Iteration starts from zero.
    Whenever an accelerated step raises the objective the momentum is reset,
    so the objective sequence is nonincreasing.

    Raises
    ------
    DivergenceError
        If the objective becomes non-finite.
    """
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    mT = data.m * data.T
    L = 2.0 / mT * float(np.max(spectral_norm(data.X))) ** 2
    if L == 0:
        L = 1.0
    backtrack = opts.step_rule == "backtracking"

    M = np.zeros((data.d, data.T))
    F = smooth_loss(M, data)
    history = [F]
    Y, t_mom, momentum = M, 1.0, False
    converged, restarts, it = False, 0, 0
    while it < opts.max_iters:
        it += 1
        fY = smooth_loss(Y, data)
        G = smooth_grad(Y, data)
        while True:
            Z, s = _svt(Y - G / L, lam / L)
            fZ = smooth_loss(Z, data)
            if not backtrack:
                break
            D = Z - Y
            if fZ <= fY + np.vdot(G, D) + 0.5 * L * np.vdot(D, D) or not np.isfinite(fZ):
                break
            L *= 2.0
        FZ = fZ + lam * float(s.sum())
        if not np.isfinite(FZ):
            raise DivergenceError(
                f"non-finite objective at iteration {it}", last_iterate=M, iterations=it
            )
        if FZ > F:
            if momentum:
                # function-value restart: redo the step from the last iterate
                Y, t_mom, momentum = M, 1.0, False
                restarts += 1
            else:
                # a plain proximal step went uphill, the step is too long
                L *= 2.0
            continue
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t_mom * t_mom))
        Y = Z + ((t_mom - 1.0) / t_next) * (Z - M)
        momentum = t_mom > 1.0
        change = F - FZ
        M, F, t_mom = Z, FZ, t_next
        history.append(F)
        if change <= opts.rel_tol * max(abs(F), np.finfo(float).tiny):
            converged = True
            break
    res = FitResult(
        M, it, F, converged,
        info={"history": history, "restarts": restarts, "lipschitz": L, "lambda": lam},
    )
    return _finish(res, t0)


def fit_nuclear_frankwolfe(data, radius, opts=None):
    """Least squares over the trace-norm ball ``||M||_* <= radius`` by Frank-Wolfe.

    Each step moves towards ``-radius * u v^T`` where ``(u, v)`` is the top
    singular pair of the gradient, with step size ``2/(k+2)``. Stops when the
    duality gap drops below ``rel_tol`` times the objective at zero.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    M = np.zeros((data.d, data.T))
    F0 = smooth_loss(M, data)
    gap = float("inf")
    converged, it = False, 0
    for k in range(opts.max_iters):
        G = smooth_grad(M, data)
        U, s, Vt = np.linalg.svd(G, full_matrices=False)
        S = -radius * np.outer(U[:, 0], Vt[0])
        gap = float(np.vdot(M - S, G))
        if gap <= opts.rel_tol * F0:
            converged = True
            break
        it = k + 1
        gamma = 2.0 / (k + 2.0)
        M = (1.0 - gamma) * M + gamma * S
    res = FitResult(M, it, smooth_loss(M, data), converged, info={"gap": gap, "radius": radius})
    return _finish(res, t0)


# ---------------------------------------------------------------------------
# factored estimators

ARMIJO = 1e-4


def fit_burer_monteiro(data, r, opts=None):
    """Gradient descent on ``f(U V^T)`` with U (d x r) and V (T x r).

    Factors start with i.i.d. N(0, 1/d) entries drawn from
    ``opts.init_seed``. Each iteration backtracks from step 1.0, halving
    until the Armijo condition with constant 1e-4 holds.
    """
    if r < 1 or r > min(data.d, data.T):
        raise ValueError(f"r={r} must lie in [1, min(d, T)]")
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    rng = datagen.stream(opts.init_seed, "burer_monteiro_init")
    scale = 1.0 / math.sqrt(data.d)
    U = rng.normal(0.0, scale, (data.d, r))
    V = rng.normal(0.0, scale, (data.T, r))
    F = smooth_loss(U @ V.T, data)
    history = [F]
    converged, it = False, 0
    while it < opts.max_iters:
        it += 1
        G = smooth_grad(U @ V.T, data)
        gU, gV = G @ V, G.T @ U
        gnorm2 = float(np.vdot(gU, gU) + np.vdot(gV, gV))
        if gnorm2 == 0.0:
            converged = True
            break
        step = 1.0
        while step > 1e-30:
            Un, Vn = U - step * gU, V - step * gV
            Fn = smooth_loss(Un @ Vn.T, data)
            if np.isfinite(Fn) and Fn <= F - ARMIJO * step * gnorm2:
                break
            step *= 0.5
        else:
            # no decrease available at machine precision
            converged = True
            break
        change = F - Fn
        U, V, F = Un, Vn, Fn
        history.append(F)
        if not np.isfinite(F):
            raise DivergenceError("non-finite objective", last_iterate=U @ V.T, iterations=it)
        if change <= opts.rel_tol * max(F, np.finfo(float).tiny):
            converged = True
            break
    res = FitResult(
        U @ V.T, it, F, converged,
        subspace=np.linalg.svd(U, full_matrices=False)[0],
        info={"history": history},
    )
    return _finish(res, t0)


def _alpha_step(data, B):
    A = np.einsum("tmd,dr->tmr", data.X, B)
    alpha, deficient = _batched_lstsq(A, data.y)
    return alpha.T, deficient


def _basis_step(gram, Xy, alpha):
    # normal equations of min_B sum_t ||y_t - X_t B alpha_t||^2 in vec(B):
    # sum_t kron(alpha_t alpha_t^T, X_t^T X_t) vec(B) = sum_t vec(X_t^T y_t alpha_t^T)
    T, d, _ = gram.shape
    r = alpha.shape[0]
    W = np.einsum("at,bt->tab", alpha, alpha).reshape(T, r * r)
    G = (W.T @ gram.reshape(T, d * d)).reshape(r, r, d, d)
    G = G.transpose(0, 2, 1, 3).reshape(r * d, r * d)
    rhs = (alpha @ Xy).reshape(r * d)
    sol = np.linalg.lstsq(G, rhs, rcond=PINV_RCOND)[0]
    return sol.reshape(r, d).T


def fit_altmin(data, r, opts=None, init_B=None):
    """Alternating least squares over ``M = B alpha`` with orthonormal B.

    Each outer iteration solves the T small r x r problems for alpha given
    B, then the joint d*r least-squares problem for B given alpha, and
    finally re-orthonormalizes B by QR while folding R into alpha (the
    product, hence the objective, is unchanged). B starts from the moment
    subspace of all tasks unless `init_B` is given.
    """
    if r < 1 or r > min(data.d, data.T):
        raise ValueError(f"r={r} must lie in [1, min(d, T)]")
    opts = opts or FitOptions()
    t0 = time.perf_counter()
    info = {"init": "given"}
    if init_B is None:
        B, ok = _top_eigvecs(moment_matrix(data), r)
        info["init"] = "moments"
        if not ok:
            rng = datagen.stream(opts.init_seed, "altmin_init")
            B = np.linalg.qr(rng.standard_normal((data.d, r)))[0]
            info["init"] = "random"
    else:
        B = orthonormalize(init_B)

    floor = 1e-24 * max(float(np.mean(data.y**2)), np.finfo(float).tiny)
    gram = np.einsum("tmi,tmj->tij", data.X, data.X)
    Xy = np.einsum("tmi,tm->ti", data.X, data.y)
    history = []
    F_prev = float("inf")
    deficient = 0
    converged, it = False, 0
    while it < opts.max_iters:
        it += 1
        alpha, deficient = _alpha_step(data, B)
        F_a = smooth_loss(B @ alpha, data)
        B = _basis_step(gram, Xy, alpha)
        F = smooth_loss(B @ alpha, data)
        history.append((F_a, F))
        Q, R = np.linalg.qr(B)
        B, alpha = Q, R @ alpha
        stalled = np.isfinite(F_prev) and F_prev - F <= opts.rel_tol * F_prev
        if F <= floor or stalled:
            converged = True
            break
        F_prev = F
    info.update(history=history, rank_deficient_tasks=deficient)
    res = FitResult(B @ alpha, it, F, converged, subspace=B, info=info)
    return _finish(res, t0)


# ---------------------------------------------------------------------------
# method of moments

def moment_matrix(data):
    """``1/(m |S|) * sum (y_i^t)^2 x_i^t x_i^t^T`` over the tasks of `data`."""
    if data.T == 0:
        raise ValueError("moment matrix of an empty task set")
    w = data.y**2
    Mom = np.einsum("tm,tmi,tmj->ij", w, data.X, data.X) / (data.m * data.T)
    return 0.5 * (Mom + Mom.T)


def _top_eigvecs(S, r):
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals)[::-1][:r]
    top = vals[order]
    ok = top[0] > 0 and top[-1] > 1e-10 * top[0]
    return vecs[:, order], bool(ok)


def fit_mom(data, r):
    """Method of Moments with cross-fitting over two task halves.

    With ``h = ceil(T/2)``, the subspace for tasks ``0..h-1`` comes from the
    moment matrix of tasks ``h..T-1`` and vice versa; coefficients are then
    per-task least squares inside the estimated subspace.
    """
    if data.T < 2:
        raise ValueError("method of moments needs at least two tasks")
    t0 = time.perf_counter()
    h = math.ceil(data.T / 2)
    first, second = data.subset(slice(0, h)), data.subset(slice(h, None))
    B1, _ = _top_eigvecs(moment_matrix(second), r)
    B2, _ = _top_eigvecs(moment_matrix(first), r)
    a1, def1 = _alpha_step(first, B1)
    a2, def2 = _alpha_step(second, B2)
    M = np.concatenate([B1 @ a1, B2 @ a2], axis=1)
    res = FitResult(
        M, 1, smooth_loss(M, data), True, subspace=B1,
        info={"B2": B2, "rank_deficient_tasks": def1 + def2},
    )
    return _finish(res, t0)


# ---------------------------------------------------------------------------
# baselines

def fit_single_task(data):
    """Independent minimum-norm least squares for each task."""
    t0 = time.perf_counter()
    sol, deficient = _batched_lstsq(data.X, data.y)
    M = sol.T
    res = FitResult(M, 1, smooth_loss(M, data), True, info={"rank_deficient_tasks": deficient})
    return _finish(res, t0)


def fit_oracle(data, B):
    """Per-task least squares restricted to the known subspace ``span(B)``."""
    t0 = time.perf_counter()
    B = np.asarray(B, dtype=float)
    alpha, deficient = _alpha_step(data, B)
    M = B @ alpha
    res = FitResult(
        M, 1, smooth_loss(M, data), True, subspace=B,
        info={"rank_deficient_tasks": deficient},
    )
    return _finish(res, t0)


# ---------------------------------------------------------------------------
# lambda selection

def default_lambda_grid(d, m, T, sigma, n=10):
    """Log grid of `n` values spanning [lam/100, 100 lam] around :func:`lambda_theory`.

    With ``sigma == 0`` the theory value vanishes, so the grid is centred on
    the ``sigma = 1`` value instead.
    """
    lam = lambda_theory(d, m, T, sigma if sigma > 0 else 1.0)
    return list(np.geomspace(lam / 100, lam * 100, n))


def _train_size(m, holdout_frac):
    # rounding guards against 0.8 * 15 = 12.000000000000002
    return math.ceil(round((1.0 - holdout_frac) * m, 9))


def select_lambda_cv(data, rule, opts=None):
    """Grid-search lambda on a per-task holdout.

    Every task is split into its first ``ceil((1 - holdout_frac) m)`` samples
    for fitting and the rest for scoring. The grid value with the smallest
    held-out mean squared error wins; ties go to the larger lambda.
    """
    grid = rule.grid
    if not grid:
        raise ValueError("cross-validation needs a nonempty lambda grid")
    n_train = _train_size(data.m, rule.holdout_frac)
    if n_train >= data.m:
        raise ValueError(f"holdout of m={data.m} samples at {rule.holdout_frac} is empty")
    train, valid = data.split_samples(n_train)
    best, best_err = None, float("inf")
    for lam in sorted(set(float(g) for g in grid), reverse=True):
        M = fit_nuclear_fista(train, lam, opts).Mhat
        err = smooth_loss(M, valid)
        if err < best_err:
            best, best_err = lam, err
    return best
