"""Monte-Carlo checks of the random-design properties behind the error bound.

Each check draws fresh Gaussian designs, evaluates one inequality per trial
and compares the pass fraction with a required level. The constants are
deliberately generous: the theory only fixes them up to universal factors.
"""

import math
from dataclasses import dataclass

import numpy as np

from .datagen import stream
from .matops import spectral_norm

__all__ = [
    "DiagnosticResult",
    "check_operator_norm",
    "check_noise_level",
    "check_restricted_convexity",
    "run_all",
]


@dataclass
class DiagnosticResult:
    name: str
    fraction: float
    required: float
    trials: int

    @property
    def passed(self):
        return self.fraction >= self.required

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return (
            f"{flag} {self.name}: {self.fraction:.4f} of {self.trials} trials "
            f"(need >= {self.required})"
        )


def check_operator_norm(d=40, m=8, trials=1000, const=3.0, seed=0):
    """Fraction of m x d Gaussian designs with ``||X||_2 <= const (sqrt d + sqrt m)``."""
    X = np.stack([stream(seed, "operator_norm", k).standard_normal((m, d)) for k in range(trials)])
    norms = spectral_norm(X)
    ok = norms <= const * (math.sqrt(d) + math.sqrt(m))
    return DiagnosticResult("design operator norm", float(ok.mean()), 0.99, trials)


def check_noise_level(d=20, m=5, T=100, sigma=1.0, trials=500, const=10.0, seed=0):
    """Noise-design correlation against a fixed unit-nuclear-norm matrix.

    Counts trials with ``|1/(mT) sum eps <x, M_t>| <= const sigma sqrt((T + d^2/m) / (m T^2))``.
    """
    rng = stream(seed, "noise_level_matrix")
    u, v = rng.standard_normal(d), rng.standard_normal(T)
    M = np.outer(u / np.linalg.norm(u), v / np.linalg.norm(v))  # ||M||_* = 1
    bound = const * sigma * math.sqrt((T + d * d / m) / (m * T * T))
    hits = 0
    for k in range(trials):
        g = stream(seed, "noise_level", k)
        X = g.standard_normal((T, m, d))
        eps = sigma * g.standard_normal((T, m))
        stat = abs(np.einsum("tm,tmd,dt->", eps, X, M)) / (m * T)
        hits += stat <= bound
    return DiagnosticResult("effective noise level", hits / trials, 0.99, trials)


def check_restricted_convexity(d=20, m=5, T=100, r=2, trials=200, const=0.1, seed=0):
    """Random rank-2r directions of unit Frobenius norm against ``||L(D)||_F^2 >= const / T``.

    ``L(D)`` stacks ``<x_i^t, D_t> / sqrt(mT)`` over all samples.
    """
    hits = 0
    for k in range(trials):
        g = stream(seed, "restricted_convexity", k)
        D = g.standard_normal((d, 2 * r)) @ g.standard_normal((2 * r, T))
        D /= np.linalg.norm(D)
        X = g.standard_normal((T, m, d))
        val = np.sum(np.einsum("tmd,dt->tm", X, D) ** 2) / (m * T)
        hits += val >= const / T
    return DiagnosticResult("restricted strong convexity", hits / trials, 0.95, trials)


def run_all(seed=0):
    return [
        check_restricted_convexity(seed=seed),
        check_noise_level(seed=seed),
        check_operator_norm(seed=seed),
    ]
