"""Experiment harness: sweeps over T, m or sigma, estimators and seeds.

Configs are flat ``key=value`` text::

    # task-count sweep with small tasks
    sweep_axis=T
    sweep_values=100,200,400,800
    m=10
    estimators=nuc,bm,altmin,mom,single,oracle

Every (cell, replicate) pair owns its own dataset seed, derived by hashing
``(base_seed, sweep_axis, cell_value, "data", replicate)``. All estimators
of a cell share that dataset and get their own initialization seed, so a
cell's records do not depend on which other cells are in the sweep.
"""

import csv
import hashlib
import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from . import datagen, estimators as est, meta
from .matops import nuclear_norm, sin_principal_angle
from .metrics import MetricRecord, frob_normalized, per_task_mean_err

__all__ = [
    "ESTIMATORS",
    "AGG_METRICS",
    "ConfigError",
    "ExperimentConfig",
    "AggregateRow",
    "hash64",
    "parse_config",
    "cell_gen_config",
    "run_cell",
    "run_sweep",
    "aggregate",
    "write_csv",
    "read_raw_csv",
]

ESTIMATORS = ("nuc", "nuc_fw", "bm", "altmin", "mom", "single", "oracle")
AGG_METRICS = (
    "frob_normalized",
    "sin_theta",
    "per_task_mean_err",
    "transfer_err",
    "runtime_ms",
    "iterations",
)
RAW_HEADER = [
    "sweep_axis", "cell_value", "estimator", "d", "r", "m", "T", "sigma", "seed",
    "frob_normalized", "sin_theta", "per_task_mean_err", "transfer_err",
    "runtime_ms", "iterations", "converged",
]
AGG_HEADER = ["sweep_axis", "cell_value", "estimator", "metric", "mean", "std", "n"]


class ConfigError(ValueError):
    """Malformed or invalid experiment configuration."""


@dataclass
class ExperimentConfig:
    sweep_axis: str
    sweep_values: list
    d: int = 100
    r: int = 5
    m: int = 10
    T: int = 800
    sigma: float = 1.0
    estimators: list = field(
        default_factory=lambda: ["nuc", "bm", "altmin", "mom", "single", "oracle"]
    )
    n_seeds: int = 12
    base_seed: int = 0
    lambda_rule: est.LambdaRule = field(default_factory=est.LambdaRule)
    feature_dist: str = "gaussian"
    param_scheme: str = "gaussian"
    output_path: str = "results"
    max_iters: int = 5000
    rel_tol: float = 1e-8
    transfer: bool = False
    record_runtime: bool = False
    fw_radius_scale: float = 1.0

    def validate(self):
        if self.sweep_axis not in ("T", "m", "sigma"):
            raise ConfigError(f"sweep_axis must be T, m or sigma, got {self.sweep_axis!r}")
        if not self.sweep_values:
            raise ConfigError("sweep_values is empty")
        if any(b <= a for a, b in zip(self.sweep_values, self.sweep_values[1:])):
            raise ConfigError(f"sweep_values must be strictly increasing: {self.sweep_values}")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        if not self.fw_radius_scale > 0:
            raise ConfigError("fw_radius_scale must be positive")
        try:
            est.FitOptions(self.max_iters, self.rel_tol)
            for v in self.sweep_values:
                cell_gen_config(self, v, 0)
        except ValueError as e:
            raise ConfigError(str(e)) from e
        return self


@dataclass
class AggregateRow:
    sweep_axis: str
    cell_value: float
    estimator: str
    metric: str
    mean: float
    std: float
    n: int


# ---------------------------------------------------------------------------
# config parsing

def _floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _bool(s):
    s = s.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


_SCALARS = {
    "d": int, "r": int, "m": int, "T": int, "sigma": float,
    "n_seeds": int, "base_seed": int, "max_iters": int, "rel_tol": float,
    "feature_dist": str, "param_scheme": str, "output_path": str,
    "sweep_axis": str, "transfer": _bool, "record_runtime": _bool,
    "fw_radius_scale": float,
}
_LAMBDA_KEYS = {
    "lambda_mode": ("mode", str),
    "lambda_value": ("value", float),
    "lambda_grid": ("grid", _floats),
    "holdout_frac": ("holdout_frac", float),
}
_KEYS = set(_SCALARS) | set(_LAMBDA_KEYS) | {"sweep_values", "estimators"}


def parse_config(text):
    """Parse ``key=value`` lines into a validated :class:`ExperimentConfig`.

    Blank lines and ``#`` comments are ignored; lists are comma separated.

    Raises
    ------
    ConfigError
        On unknown keys, unparsable values or invariant violations.
    """
    values, lam = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            if key in _LAMBDA_KEYS:
                name, conv = _LAMBDA_KEYS[key]
                lam[name] = conv(val)
            elif key == "estimators":
                values[key] = [e.strip() for e in val.split(",") if e.strip()]
            elif key == "sweep_values":
                values[key] = _floats(val)
            else:
                values[key] = _SCALARS[key](val)
        except ValueError as e:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {e}") from e

    if "sweep_axis" not in values:
        raise ConfigError("missing required key 'sweep_axis'")
    if values["sweep_axis"] in ("T", "m") and "sweep_values" in values:
        sv = values["sweep_values"]
        if any(v != int(v) for v in sv):
            raise ConfigError(f"sweep over {values['sweep_axis']} needs integer values")
        values["sweep_values"] = [int(v) for v in sv]
    values.setdefault("sweep_values", [])
    try:
        values["lambda_rule"] = est.LambdaRule(**lam)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return ExperimentConfig(**values).validate()


# ---------------------------------------------------------------------------
# seeding and cells

def hash64(*parts):
    """Stable 64-bit hash of the string forms of `parts`."""
    text = "\x1f".join(str(p) for p in parts).encode()
    return int.from_bytes(hashlib.blake2b(text, digest_size=8).digest(), "little")


def _cell_key(cfg, value):
    return int(value) if cfg.sweep_axis in ("T", "m") else float(value)


def cell_gen_config(cfg, value, replicate):
    """Generation config of one (cell, replicate) pair."""
    value = _cell_key(cfg, value)
    dims = {"d": cfg.d, "r": cfg.r, "m": cfg.m, "T": cfg.T, "sigma": cfg.sigma}
    dims[cfg.sweep_axis] = value
    seed = hash64(cfg.base_seed, cfg.sweep_axis, value, "data", replicate)
    return datagen.GenConfig(
        feature_dist=cfg.feature_dist, param_scheme=cfg.param_scheme, seed=seed, **dims
    )


def _lambda(cfg, gen, data, opts):
    rule = cfg.lambda_rule
    if rule.mode == "fixed":
        return rule.value
    if rule.mode == "theory":
        return est.lambda_theory(gen.d, gen.m, gen.T, gen.sigma)
    if rule.grid is None:
        rule = replace(rule, grid=est.default_lambda_grid(gen.d, gen.m, gen.T, gen.sigma))
    return est.select_lambda_cv(data, rule, opts)


def _fit(cfg, name, gen, gt, data, opts):
    if name == "nuc":
        return est.fit_nuclear_fista(data, _lambda(cfg, gen, data, opts), opts)
    if name == "nuc_fw":
        radius = cfg.fw_radius_scale * nuclear_norm(gt.Mstar)
        return est.fit_nuclear_frankwolfe(data, radius, opts)
    if name == "bm":
        return est.fit_burer_monteiro(data, gen.r, opts)
    if name == "altmin":
        return est.fit_altmin(data, gen.r, opts)
    if name == "mom":
        return est.fit_mom(data, gen.r)
    if name == "single":
        return est.fit_single_task(data)
    if name == "oracle":
        return est.fit_oracle(data, gt.B)
    raise ValueError(f"unknown estimator {name!r}")


def _subspace(name, res, r):
    if name == "single":
        return None
    if res.subspace is not None:
        return res.subspace
    return meta.extract_subspace(res.Mhat, r)


def _transfer_err(name, basis, gen, gt):
    task, theta = datagen.gen_new_task(gen, gt.B, datagen.stream(gen.seed, "new_task"))
    if basis is None:
        # single-task baseline: least squares on the new task alone
        theta_hat = np.linalg.lstsq(task.X, task.y, rcond=1e-10)[0]
    else:
        theta_hat = meta.transfer_fit(basis, task).theta_hat
    return float(np.linalg.norm(theta_hat - theta))


def _replicate(cfg, value, replicate, names):
    key = _cell_key(cfg, value)
    gen = cell_gen_config(cfg, value, replicate)
    gt = datagen.gen_ground_truth(gen)
    data = datagen.gen_dataset(gen, gt)
    out = []
    for name in names:
        opts = est.FitOptions(
            max_iters=cfg.max_iters,
            rel_tol=cfg.rel_tol,
            init_seed=hash64(cfg.base_seed, cfg.sweep_axis, key, name, replicate),
        )
        try:
            res = _fit(cfg, name, gen, gt, data, opts)
        except est.DivergenceError as e:
            M = e.last_iterate if e.last_iterate is not None else np.zeros_like(gt.Mstar)
            res = est.FitResult(M, e.iterations, float("nan"), False)
        except np.linalg.LinAlgError:
            res = est.FitResult(np.zeros_like(gt.Mstar), 0, float("nan"), False)
        basis = _subspace(name, res, gen.r) if np.all(np.isfinite(res.Mhat)) else None
        sin_theta = None if basis is None else sin_principal_angle(gt.B, basis)
        transfer = None
        if cfg.transfer and (basis is not None or name == "single"):
            transfer = _transfer_err(name, basis, gen, gt)
        out.append(MetricRecord(
            sweep_axis=cfg.sweep_axis,
            cell_value=key,
            estimator=name,
            d=gen.d, r=gen.r, m=gen.m, T=gen.T, sigma=gen.sigma,
            seed=replicate,
            frob_normalized=frob_normalized(res.Mhat, gt.Mstar, gen.T),
            sin_theta=sin_theta,
            per_task_mean_err=per_task_mean_err(res.Mhat, gt.Mstar),
            transfer_err=transfer,
            runtime_ms=res.runtime_ms if cfg.record_runtime else None,
            iterations=int(res.iterations),
            converged=bool(res.converged),
        ))
    return out


def run_cell(cfg, cell_value, estimator, seed):
    """Generate the data of one cell replicate, fit `estimator`, return its record.

    Solver failures never propagate: they produce a record with
    ``converged=False`` computed from the last finite iterate.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"unknown estimator {estimator!r}")
    return _replicate(cfg, cell_value, seed, [estimator])[0]


def _sort_key(rec):
    return (rec.cell_value, rec.estimator, rec.seed)


def run_sweep(cfg, threads=1):
    """Run every cell x estimator x seed and aggregate per (cell, estimator, metric).

    Returns ``(records, aggregates)``, both deterministically ordered.
    """
    jobs = [(v, k) for v in cfg.sweep_values for k in range(cfg.n_seeds)]

    def work(job):
        return _replicate(cfg, job[0], job[1], cfg.estimators)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, jobs))
    else:
        chunks = [work(j) for j in jobs]
    records = sorted((r for c in chunks for r in c), key=_sort_key)
    return records, aggregate(records)


def aggregate(records):
    """Mean and population standard deviation of each metric over seeds.

    Only finite values count; a metric that is undefined for an estimator
    yields a row with ``n = 0`` and empty statistics.
    """
    groups = {}
    for rec in records:
        groups.setdefault((rec.sweep_axis, rec.cell_value, rec.estimator), []).append(rec)
    rows = []
    for (axis, value, name), recs in sorted(groups.items(), key=lambda kv: kv[0][1:]):
        for metric in AGG_METRICS:
            vals = [getattr(r, metric) for r in recs]
            vals = [float(v) for v in vals if v is not None and math.isfinite(v)]
            if vals:
                mean, std = statistics.mean(vals), statistics.pstdev(vals)
            else:
                mean = std = None
            rows.append(AggregateRow(axis, value, name, metric, mean, std, len(vals)))
    return rows


# ---------------------------------------------------------------------------
# CSV

def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write(path, header, rows):
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([_fmt(row[h]) for h in header])
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e


def write_csv(records, aggregates, path):
    """Write ``path.raw.csv`` and ``path.agg.csv``."""
    path = os.fspath(path)
    records = sorted(records, key=_sort_key)
    _write(path + ".raw.csv", RAW_HEADER, [asdict(r) for r in records])
    _write(path + ".agg.csv", AGG_HEADER, [asdict(a) for a in aggregates])


def _parse_field(name, text):
    if text == "":
        return None
    if name == "converged":
        return text == "true"
    if name in ("d", "r", "m", "T", "seed", "iterations"):
        return int(text)
    if name in ("sweep_axis", "estimator"):
        return text
    if name == "cell_value":
        return int(text) if text.lstrip("-").isdigit() else float(text)
    return float(text)


def read_raw_csv(path):
    """Read a ``.raw.csv`` file back into :class:`MetricRecord` objects."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [MetricRecord(**{k: _parse_field(k, v) for k, v in row.items()}) for row in rows]
