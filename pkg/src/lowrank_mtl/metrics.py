"""Error metrics and theoretical rate curves.

The rate functions drop every universal constant and logarithmic factor;
they only describe how errors should scale with (sigma, r, d, m, T).
"""

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

__all__ = [
    "MetricRecord",
    "frob_normalized",
    "per_task_mean_err",
    "rate_tracenorm",
    "rate_single",
    "rate_oracle",
]


@dataclass
class MetricRecord:
    """One row of experiment output."""

    sweep_axis: str
    cell_value: float
    estimator: str
    d: int
    r: int
    m: int
    T: int
    sigma: float
    seed: int
    frob_normalized: float
    sin_theta: Optional[float]
    per_task_mean_err: float
    transfer_err: Optional[float] = None
    runtime_ms: Optional[float] = None
    iterations: int = 0
    converged: bool = True

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


def _pair(Mhat, Mstar):
    Mhat = np.asarray(Mhat, dtype=float)
    Mstar = np.asarray(Mstar, dtype=float)
    if Mhat.shape != Mstar.shape:
        raise ValueError(f"shape mismatch {Mhat.shape} vs {Mstar.shape}")
    return Mhat, Mstar


def frob_normalized(Mhat, Mstar, T):
    """``||Mhat - Mstar||_F / sqrt(T)``."""
    Mhat, Mstar = _pair(Mhat, Mstar)
    return float(np.linalg.norm(Mhat - Mstar) / math.sqrt(T))


def per_task_mean_err(Mhat, Mstar):
    """Mean over tasks of the Euclidean error of each parameter column."""
    Mhat, Mstar = _pair(Mhat, Mstar)
    return float(np.mean(np.linalg.norm(Mhat - Mstar, axis=0)))


def rate_tracenorm(sigma, r, d, m, T):
    """``sigma sqrt(r (d^2/m + T) / m) + sqrt(r d (d + T) / m^2)``."""
    return sigma * math.sqrt(r * (d * d / m + T) / m) + math.sqrt(r * d * (d + T) / m**2)


def rate_single(sigma, d, m, T):
    return sigma * math.sqrt(d * T / m)


def rate_oracle(sigma, r, m, T):
    return sigma * math.sqrt(r * T / m)
