"""Synthetic multi-task linear regression data with a shared low-rank structure.

Labels follow ``y_i^t = <M*[:, t], x_i^t> + eps_i^t`` with ``M* = B @ alpha``
and ``B`` a d x r orthonormal basis.

Random streams
--------------
Every draw comes from a PCG64 generator keyed on ``(seed, purpose, index)``
through :class:`numpy.random.SeedSequence`, where ``purpose`` is a short tag
("ground_truth", "features", "noise", ...) hashed with CRC32 and ``index`` is
the task index. Tasks therefore own independent streams and can be generated
in any order, or concurrently, with identical results.
"""

import zlib
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FEATURE_DISTS",
    "PARAM_SCHEMES",
    "GenConfig",
    "GroundTruth",
    "TaskData",
    "MultiTaskDataset",
    "stream",
    "gen_ground_truth",
    "sample_features",
    "gen_dataset",
    "gen_new_task",
    "max_task_norm",
    "dump_dataset",
    "load_dataset",
]

FEATURE_DISTS = ("gaussian", "adversarial")
PARAM_SCHEMES = ("gaussian", "duplicated")


def stream(seed, purpose, index=0):
    """Independent generator for the stream key ``(seed, purpose, index)``."""
    tag = zlib.crc32(purpose.encode("ascii"))
    ss = np.random.SeedSequence([int(seed) % 2**64, tag, int(index)])
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class GenConfig:
    d: int
    r: int
    m: int
    T: int
    sigma: float = 1.0
    feature_dist: str = "gaussian"
    param_scheme: str = "gaussian"
    seed: int = 0
    # task-norm bound from the diversity assumption; measured, never enforced
    C: float = float("inf")

    def __post_init__(self):
        for name in ("d", "r", "m", "T"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be a positive integer")
        if self.r > min(self.d, self.T):
            raise ValueError(f"r={self.r} exceeds min(d, T)={min(self.d, self.T)}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.feature_dist not in FEATURE_DISTS:
            raise ValueError(f"unknown feature_dist {self.feature_dist!r}")
        if self.param_scheme not in PARAM_SCHEMES:
            raise ValueError(f"unknown param_scheme {self.param_scheme!r}")
        if not self.C > 0:
            raise ValueError("C must be positive")


@dataclass
class GroundTruth:
    Mstar: np.ndarray  # (d, T)
    B: np.ndarray  # (d, r), orthonormal columns
    alpha: np.ndarray  # (r, T)


@dataclass
class TaskData:
    X: np.ndarray  # (m, d)
    y: np.ndarray  # (m,)

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X rows and y length differ")


@dataclass
class MultiTaskDataset:
    """T tasks with m samples each, stored as stacked arrays.

    ``X`` has shape (T, m, d) and ``y`` shape (T, m).
    """

    X: np.ndarray
    y: np.ndarray
    sigma: float = 0.0
    feature_dist: str = "gaussian"
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 3 or self.y.shape != self.X.shape[:2]:
            raise ValueError(
                f"inconsistent shapes X{self.X.shape} and y{self.y.shape}"
            )

    @property
    def T(self):
        return self.X.shape[0]

    @property
    def m(self):
        return self.X.shape[1]

    @property
    def d(self):
        return self.X.shape[2]

    @property
    def tasks(self):
        return [TaskData(self.X[t], self.y[t]) for t in range(self.T)]

    def subset(self, idx):
        """Dataset restricted to the tasks in `idx` (any index expression)."""
        return MultiTaskDataset(
            self.X[idx], self.y[idx], self.sigma, self.feature_dist, self.seed
        )

    def split_samples(self, n_first):
        """Split every task into its first `n_first` samples and the rest."""
        first = MultiTaskDataset(
            self.X[:, :n_first], self.y[:, :n_first], self.sigma,
            self.feature_dist, self.seed,
        )
        rest = MultiTaskDataset(
            self.X[:, n_first:], self.y[:, n_first:], self.sigma,
            self.feature_dist, self.seed,
        )
        return first, rest

    @classmethod
    def from_tasks(cls, tasks, **kwargs):
        X = np.stack([t.X for t in tasks])
        y = np.stack([t.y for t in tasks])
        return cls(X, y, **kwargs)


def gen_ground_truth(cfg):
    """Draw ``B`` and ``alpha`` for the configured parameter scheme.

    ``B`` holds the top-r left singular vectors of a d x d standard normal
    matrix. With the ``gaussian`` scheme every entry of ``alpha`` is standard
    normal. With ``duplicated``, an r x r standard normal matrix supplies the
    first r columns and the remaining T - r columns are copies of them picked
    uniformly with replacement.
    """
    rng = stream(cfg.seed, "ground_truth")
    G = rng.standard_normal((cfg.d, cfg.d))
    U = np.linalg.svd(G)[0]
    B = U[:, : cfg.r].copy()
    if cfg.param_scheme == "gaussian":
        alpha = rng.standard_normal((cfg.r, cfg.T))
    else:
        base = rng.standard_normal((cfg.r, cfg.r))
        picks = rng.integers(0, cfg.r, size=cfg.T - cfg.r)
        alpha = np.concatenate([base, base[:, picks]], axis=1)
    return GroundTruth(B @ alpha, B, alpha)


def sample_features(dist, d, n, rng):
    """n x d matrix of i.i.d. isotropic feature rows.

    ``adversarial`` draws coordinate k (1-based) as
    ``cos(k pi / 2d) * xi + sin(k pi / 2d) * eta`` with ``xi ~ U[-sqrt 3, sqrt 3]``
    and ``eta ~ N(0, 1)``, so every coordinate has unit variance but the
    fourth moments differ across coordinates.
    """
    if dist == "gaussian":
        return rng.standard_normal((n, d))
    if dist == "adversarial":
        angle = np.arange(1, d + 1) / d * (np.pi / 2)
        xi = rng.uniform(-np.sqrt(3), np.sqrt(3), size=(n, d))
        eta = rng.standard_normal((n, d))
        return np.cos(angle) * xi + np.sin(angle) * eta
    raise ValueError(f"unknown feature distribution {dist!r}")


def _task_sample(cfg, theta, seed, index):
    X = sample_features(cfg.feature_dist, cfg.d, cfg.m, stream(seed, "features", index))
    noise = stream(seed, "noise", index).standard_normal(cfg.m)
    return X, X @ theta + cfg.sigma * noise


def gen_dataset(cfg, gt):
    """Sample features and noisy labels for every task of `gt`."""
    if gt.Mstar.shape != (cfg.d, cfg.T):
        raise ValueError(
            f"ground truth has shape {gt.Mstar.shape}, config wants {(cfg.d, cfg.T)}"
        )
    X = np.empty((cfg.T, cfg.m, cfg.d))
    y = np.empty((cfg.T, cfg.m))
    for t in range(cfg.T):
        X[t], y[t] = _task_sample(cfg, gt.Mstar[:, t], cfg.seed, t)
    return MultiTaskDataset(X, y, cfg.sigma, cfg.feature_dist, cfg.seed)


def gen_new_task(cfg, B, rng):
    """An unseen task sharing the subspace `B`; returns ``(TaskData, theta)``."""
    B = np.asarray(B, dtype=float)
    alpha = rng.standard_normal(B.shape[1])
    theta = B @ alpha
    X = sample_features(cfg.feature_dist, cfg.d, cfg.m, rng)
    y = X @ theta + cfg.sigma * rng.standard_normal(cfg.m)
    return TaskData(X, y), theta


def max_task_norm(gt):
    """Largest squared column norm of ``M*`` (empirical task-diversity constant)."""
    M = gt.Mstar if isinstance(gt, GroundTruth) else np.asarray(gt, dtype=float)
    if M.size == 0:
        return 0.0
    return float(np.max(np.sum(M**2, axis=0)))


_HEADER = "MTLDATA v1"


def dump_dataset(data, path):
    """Write `data` in the plain-text MTLDATA v1 format.

    Line 1 is ``MTLDATA v1 d m T sigma seed``; each task then contributes a
    ``task t`` line (t counted from 1) followed by m lines holding the d
    features and the label, all printed with 17 significant digits.
    """
    with open(path, "w") as fh:
        fh.write(f"{_HEADER} {data.d} {data.m} {data.T} {data.sigma!r} {int(data.seed)}\n")
        for t in range(data.T):
            fh.write(f"task {t + 1}\n")
            rows = np.column_stack([data.X[t], data.y[t]])
            for row in rows:
                fh.write(" ".join(f"{v:.17g}" for v in row))
                fh.write("\n")


def load_dataset(path, feature_dist="gaussian"):
    """Read a file written by :func:`dump_dataset`.

    The format does not carry the feature distribution, so it is supplied by
    the caller.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    head = lines[0].split()
    if " ".join(head[:2]) != _HEADER or len(head) != 7:
        raise ValueError(f"{path}: not an MTLDATA v1 file")
    d, m, T = (int(v) for v in head[2:5])
    sigma, seed = float(head[5]), int(head[6])
    X = np.empty((T, m, d))
    y = np.empty((T, m))
    pos = 1
    for t in range(T):
        if lines[pos].split() != ["task", str(t + 1)]:
            raise ValueError(f"{path}:{pos + 1}: expected 'task {t + 1}'")
        block = np.array(
            [[float(v) for v in line.split()] for line in lines[pos + 1 : pos + 1 + m]]
        )
        if block.shape != (m, d + 1):
            raise ValueError(f"{path}: task {t + 1} block has shape {block.shape}")
        X[t], y[t] = block[:, :d], block[:, d]
        pos += m + 1
    return MultiTaskDataset(X, y, sigma, feature_dist, seed)
