import dataclasses
import math

import numpy as np
import pytest

from lowrank_mtl import bench
from lowrank_mtl.metrics import MetricRecord

SMALL = """# tiny sweep
sweep_axis=T
sweep_values=6,10
d=6
r=2
m=8
n_seeds=2
estimators=nuc,single,oracle,mom
max_iters=200
"""


def small(**kw):
    return dataclasses.replace(bench.parse_config(SMALL), **kw).validate()


class TestParse:
    def test_task_count_sweep(self):
        cfg = bench.parse_config("sweep_axis=T\nsweep_values=100,200,400,800\nm=10")
        assert cfg.sweep_values == [100, 200, 400, 800]
        assert (cfg.d, cfg.r, cfg.m, cfg.sigma, cfg.n_seeds) == (100, 5, 10, 1.0, 12)
        assert cfg.lambda_rule.mode == "theory"

    def test_empty_rejected(self):
        with pytest.raises(bench.ConfigError, match="sweep_axis"):
            bench.parse_config("")

    def test_not_increasing(self):
        with pytest.raises(bench.ConfigError):
            bench.parse_config("sweep_axis=T\nsweep_values=400,200")

    def test_unknown_key_names_line(self):
        with pytest.raises(bench.ConfigError, match=r"line 3.*'bogus'"):
            bench.parse_config("sweep_axis=T\nsweep_values=10\nbogus=1")

    def test_bad_value(self):
        with pytest.raises(bench.ConfigError, match="line 2"):
            bench.parse_config("sweep_axis=T\nd=abc\nsweep_values=10")

    def test_comments_lists_lambda(self):
        cfg = bench.parse_config(
            "sweep_axis=sigma  # noise\n\nsweep_values=0, 0.5,1\n"
            "estimators=nuc, mom\nlambda_mode=cross_validated\nlambda_grid=0.1,1\n"
            "transfer=true\n"
        )
        assert cfg.sweep_values == [0.0, 0.5, 1.0]
        assert cfg.estimators == ["nuc", "mom"]
        assert cfg.lambda_rule.grid == [0.1, 1.0] and cfg.transfer

    def test_integer_axis(self):
        with pytest.raises(bench.ConfigError):
            bench.parse_config("sweep_axis=m\nsweep_values=5.5,8")

    def test_invalid_dimensions(self):
        with pytest.raises(bench.ConfigError):
            bench.parse_config("sweep_axis=T\nsweep_values=2,10\nr=5")
        with pytest.raises(bench.ConfigError):
            bench.parse_config("sweep_axis=T\nsweep_values=10\nestimators=nuc,lasso")
        with pytest.raises(bench.ConfigError):
            bench.parse_config("sweep_axis=T\nsweep_values=10\nn_seeds=0")


class TestSeeds:
    def test_hash_stable(self):
        assert bench.hash64(0, "T", 100, "data", 0) == bench.hash64(0, "T", 100, "data", 0)
        assert bench.hash64(0, "T", 100, "data", 0) != bench.hash64(0, "T", 100, "data", 1)
        assert 0 <= bench.hash64("x") < 2**64

    def test_cells_share_nothing(self):
        cfg = small()
        a = bench.cell_gen_config(cfg, 6, 0)
        assert a.T == 6 and a.seed != bench.cell_gen_config(cfg, 10, 0).seed


class TestRunCell:
    def test_oracle_noiseless(self):
        cfg = small(sigma=0.0)
        assert bench.run_cell(cfg, 10, "oracle", 0).frob_normalized <= 1e-6

    def test_deterministic(self):
        cfg = small()
        assert bench.run_cell(cfg, 10, "nuc", 1) == bench.run_cell(cfg, 10, "nuc", 1)

    def test_single_has_no_angle(self):
        rec = bench.run_cell(small(), 10, "single", 0)
        assert rec.sin_theta is None and rec.runtime_ms is None

    def test_runtime_opt_in(self):
        assert bench.run_cell(small(record_runtime=True), 10, "mom", 0).runtime_ms >= 0

    @pytest.mark.filterwarnings("ignore::lowrank_mtl.meta.SubspaceAmbiguityWarning")
    def test_divergence_recorded(self, monkeypatch):
        def boom(*a, **k):
            raise bench.est.DivergenceError("boom", last_iterate=None, iterations=3)

        monkeypatch.setattr(bench.est, "fit_nuclear_fista", boom)
        rec = bench.run_cell(small(), 10, "nuc", 0)
        assert rec.converged is False and rec.iterations == 3
        assert math.isfinite(rec.frob_normalized)

    def test_transfer(self):
        cfg = small(transfer=True)
        for name in ("nuc", "single", "oracle"):
            assert bench.run_cell(cfg, 10, name, 0).transfer_err >= 0

    def test_unknown_estimator(self):
        with pytest.raises(ValueError):
            bench.run_cell(small(), 10, "lasso", 0)

    def test_every_estimator_runs(self):
        cfg = small(estimators=list(bench.ESTIMATORS), T=10)
        for name in bench.ESTIMATORS:
            rec = bench.run_cell(cfg, 10, name, 0)
            assert rec.estimator == name and math.isfinite(rec.frob_normalized)


class TestSweep:
    def test_counts_and_order(self):
        cfg = small(n_seeds=3)
        recs, aggs = bench.run_sweep(cfg)
        assert len(recs) == 2 * 4 * 3
        keys = [(r.cell_value, r.estimator, r.seed) for r in recs]
        assert keys == sorted(keys)
        assert len(aggs) == 2 * 4 * len(bench.AGG_METRICS)

    def test_grid_count(self):
        cfg = small(sweep_values=[6, 8, 10, 12], n_seeds=12, estimators=["single", "oracle", "mom"])
        recs, _ = bench.run_sweep(cfg)
        assert len(recs) == 144

    def test_threads_match_sequential(self):
        cfg = small()
        assert bench.run_sweep(cfg, threads=4) == bench.run_sweep(cfg, threads=1)

    def test_cell_independence(self):
        full, _ = bench.run_sweep(small())
        alone, _ = bench.run_sweep(small(sweep_values=[10]))
        assert [r for r in full if r.cell_value == 10] == alone

    def test_identical_values_have_zero_std(self):
        recs = [
            MetricRecord("T", 5, "single", 2, 1, 3, 5, 1.0, s, 0.1, None, 0.3, iterations=1)
            for s in range(12)
        ]
        rows = {a.metric: a for a in bench.aggregate(recs)}
        assert rows["frob_normalized"].mean == 0.1 and rows["frob_normalized"].std == 0
        assert rows["frob_normalized"].n == 12
        assert rows["sin_theta"].n == 0 and rows["sin_theta"].mean is None

    def test_non_finite_excluded(self):
        recs = [
            MetricRecord("T", 5, "nuc", 2, 1, 3, 5, 1.0, 0, float("nan"), 0.5, 0.3),
            MetricRecord("T", 5, "nuc", 2, 1, 3, 5, 1.0, 1, 2.0, 0.5, 0.3),
        ]
        rows = {a.metric: a for a in bench.aggregate(recs)}
        assert rows["frob_normalized"].n == 1 and rows["frob_normalized"].mean == 2.0


class TestCsv:
    def test_headers_and_empty(self, tmp_path):
        bench.write_csv([], [], tmp_path / "out")
        raw = (tmp_path / "out.raw.csv").read_text()
        agg = (tmp_path / "out.agg.csv").read_text()
        assert raw == (
            "sweep_axis,cell_value,estimator,d,r,m,T,sigma,seed,frob_normalized,sin_theta,"
            "per_task_mean_err,transfer_err,runtime_ms,iterations,converged\n"
        )
        assert agg == "sweep_axis,cell_value,estimator,metric,mean,std,n\n"

    def test_round_trip(self, tmp_path):
        recs, aggs = bench.run_sweep(small(transfer=True))
        bench.write_csv(recs, aggs, tmp_path / "out")
        back = bench.read_raw_csv(tmp_path / "out.raw.csv")
        assert len(back) == len(recs)
        for a, b in zip(recs, back):
            for name in MetricRecord.field_names():
                x, y = getattr(a, name), getattr(b, name)
                if isinstance(x, float):
                    assert y == pytest.approx(x, rel=1e-12)
                else:
                    assert x == y
        lines = (tmp_path / "out.agg.csv").read_text().splitlines()
        assert len(lines) == 1 + len(aggs)

    def test_byte_identical(self, tmp_path):
        for name in ("a", "b"):
            recs, aggs = bench.run_sweep(small())
            bench.write_csv(recs, aggs, tmp_path / name)
        for ext in (".raw.csv", ".agg.csv"):
            assert (tmp_path / ("a" + ext)).read_bytes() == (tmp_path / ("b" + ext)).read_bytes()

    def test_unwritable(self, tmp_path):
        with pytest.raises(OSError, match="nope"):
            bench.write_csv([], [], tmp_path / "nope" / "out")
