"""Monte Carlo harness: metrics, sweeps, thresholds, export, serialization."""

import json
import math

import numpy as np
import pytest

from tensorce import (EstimatorSpec, ExperimentConfig, ExportConfig,
                      RunRecord, dof_cp, dof_tucker, extract_threshold, nmse,
                      nmse_db, read_cten, read_results, run_monte_carlo,
                      write_results)
from tensorce.bench import (ThresholdRecord, default_experiment4_config,
                            experiment4, mean_nmse_curve, thresholds_as_dicts)
from tensorce.seeding import derive_rng


class TestNmse:
    def test_trivial_values(self):
        rng = derive_rng(3, "nmse")
        h = rng.standard_normal((3, 3, 3)) + 1j * rng.standard_normal((3, 3, 3))
        assert nmse(h, h) == 0.0
        assert abs(nmse(np.zeros_like(h), h) - 1.0) <= 1e-15
        assert abs(nmse(2 * h, h) - 1.0) <= 1e-12

    def test_zero_truth_rejected(self):
        with pytest.raises(ValueError):
            nmse(np.ones((2, 2, 2), complex), np.zeros((2, 2, 2), complex))

    def test_db_conversion_monotone(self):
        values = [1e-4, 1e-3, 0.5, 1.0, 2.0]
        dbs = [nmse_db(v) for v in values]
        assert dbs == sorted(dbs)
        assert abs(nmse_db(1.0)) <= 1e-12
        assert nmse_db(0.0) == -math.inf


class TestDof:
    def test_tucker_paper_values(self):
        assert dof_tucker((2, 2, 3), (32, 32, 128)) == 524
        assert dof_tucker((15, 15, 16), (32, 32, 128)) == 6608

    def test_cp_value(self):
        assert dof_cp(5, (32, 32, 128)) == 960


class TestThresholdExtraction:
    def test_step_curve_returns_grid_point(self):
        grid = [0.01, 0.02, 0.05, 0.08, 0.10]
        for i in range(len(grid)):
            means = [1.0] * i + [0.005] * (len(grid) - i)
            assert extract_threshold(grid, means) == grid[i]

    def test_never_reached(self):
        assert extract_threshold([0.1, 0.2], [0.5, 0.02]) is None

    def test_no_interpolation(self):
        # barely failing then strongly passing: still the passing grid point
        assert extract_threshold([0.1, 0.2], [0.011, 1e-6]) == 0.2


TINY = dict(dims=(8, 8, 16), n_paths=(2,), snr_dbs=(10.0,), mc_runs=2,
            base_seed=7)


class TestRunMonteCarlo:
    def test_record_count_and_order(self):
        cfg = ExperimentConfig(
            experiment_id="t-count", pilot_ratios=(0.3, 0.5, 0.8),
            estimators=(EstimatorSpec("ls"),
                        EstimatorSpec("tucker", {"ranks": (2, 2, 3)})),
            **TINY)
        records = run_monte_carlo(cfg)
        assert len(records) == 12
        key = [(r.pilot_ratio, r.estimator, r.run_index) for r in records]
        expected = [(rho, name, run) for rho in (0.3, 0.5, 0.8)
                    for name in ("ls", "tucker") for run in (0, 1)]
        assert key == expected

    def test_paired_observations_share_hash(self):
        cfg = ExperimentConfig(
            experiment_id="t-pair", pilot_ratios=(0.4,),
            estimators=(EstimatorSpec("ls"), EstimatorSpec("omp"),
                        EstimatorSpec("tucker", {"ranks": (2, 2, 3)})),
            **TINY)
        _, hashes = run_monte_carlo(cfg, return_hashes=True)
        # one hash per (point, run); all estimators consumed that observation
        assert len(hashes) == 2
        assert len(set(hashes.values())) == 2

    def test_rerun_identical_records(self):
        cfg = ExperimentConfig(
            experiment_id="t-det", pilot_ratios=(0.4,),
            estimators=(EstimatorSpec("ls"),
                        EstimatorSpec("cp", {"rank": 2, "restarts": 2})),
            **TINY)
        r1 = run_monte_carlo(cfg)
        r2 = run_monte_carlo(cfg)
        assert [(a.estimator, a.nmse, a.seed) for a in r1] \
            == [(b.estimator, b.nmse, b.seed) for b in r2]

    def test_parallel_matches_serial(self):
        cfg = ExperimentConfig(
            experiment_id="t-par", pilot_ratios=(0.4, 0.6),
            estimators=(EstimatorSpec("ls"),
                        EstimatorSpec("tucker", {"ranks": (2, 2, 3)})),
            **TINY)
        serial = run_monte_carlo(cfg, n_jobs=1)
        parallel = run_monte_carlo(cfg, n_jobs=2)
        assert [(a.estimator, a.pilot_ratio, a.run_index, a.nmse)
                for a in serial] \
            == [(b.estimator, b.pilot_ratio, b.run_index, b.nmse)
                for b in parallel]

    def test_mean_curve_shape(self):
        cfg = ExperimentConfig(
            experiment_id="t-curve", pilot_ratios=(0.3, 0.6),
            estimators=(EstimatorSpec("ls"),), **TINY)
        records = run_monte_carlo(cfg)
        curve = mean_nmse_curve(records, "ls", "pilot_ratio")
        assert [row[0] for row in curve] == [0.3, 0.6]
        assert curve[0][1] > curve[1][1]   # more pilots, lower zero-fill NMSE


class TestExperiment4Mechanics:
    def test_threshold_records_and_arithmetic(self):
        cfg = default_experiment4_config(
            dims=(8, 8, 16), n_paths=(2,), snr_dbs=(20.0, 100.0),
            pilot_ratios=(0.2, 0.5, 0.8), mc_runs=2)
        result = experiment4(cfg)
        assert set(result.heatmap) == {20.0, 100.0}
        assert result.heatmap[20.0].shape == (1, 3)
        for record in result.thresholds:
            assert record.dof_cp == dof_cp(2, (8, 8, 16))
            assert record.dof_tucker == dof_tucker((2, 2, 3), (8, 8, 16))
            if record.rho_min is not None:
                assert record.rho_min in cfg.pilot_ratios
                assert record.omega_min == round(record.rho_min * 8 * 8 * 16)
                assert record.oversampling == pytest.approx(
                    record.omega_min / record.dof_cp)

    def test_not_reached_serialization(self):
        record = ThresholdRecord(snr_db=10.0, n_paths=5, rho_min=None,
                                 omega_min=None, oversampling=None,
                                 dof_cp=960, dof_tucker=1238)
        payload = thresholds_as_dicts([record])[0]
        assert payload["rho_min"] == "not reached"
        assert payload["omega_min"] == "not reached"


class TestWriteResults:
    @pytest.fixture()
    def records(self):
        return [
            RunRecord("ls", 0.1, 10.0, 5, 0, 0.91, nmse_db(0.91), 0, 0.01, 42),
            RunRecord("tucker", 0.1, 10.0, 5, 0, 0.074, nmse_db(0.074), 20,
                      0.5, 42),
        ]

    def test_header_only_for_empty(self, tmp_path):
        path = tmp_path / "empty.csv"
        write_results([], path, "csv")
        lines = path.read_text().strip().splitlines()
        assert lines == ["estimator,pilot_ratio,snr_db,n_paths,run_index,"
                         "nmse,nmse_db,iterations,wall_time_s,seed"]

    def test_roundtrip_csv(self, tmp_path, records):
        path = tmp_path / "r.csv"
        write_results(records, path, "csv")
        back = read_results(path)
        assert len(back) == 2
        for a, b in zip(records, back):
            assert a.estimator == b.estimator
            assert a.nmse == b.nmse
            assert a.nmse_db == b.nmse_db
            assert a.seed == b.seed

    def test_roundtrip_json(self, tmp_path, records):
        path = tmp_path / "r.json"
        write_results(records, path, "json")
        back = read_results(path)
        assert [b.nmse for b in back] == [a.nmse for a in records]
        payload = json.loads(path.read_text())
        assert payload["records"][0]["failed"] is False

    def test_db_column_consistency(self, tmp_path, records):
        path = tmp_path / "r.csv"
        write_results(records, path, "csv")
        for rec in read_results(path):
            assert abs(rec.nmse_db - 10 * math.log10(rec.nmse)) <= 1e-9


class TestExport:
    CFG = ExportConfig(dims=(8, 8, 16), n_paths=3, diffuse_fraction=0.3,
                       rho=0.3, snr_db=10.0, ranks=(3, 3, 4), base_seed=11)

    def test_layout_and_split(self, tmp_path):
        from tensorce import export_hybrid_dataset
        manifest = export_hybrid_dataset(self.CFG, 10, tmp_path / "d")
        assert manifest["count"] == 10
        splits = [s["split"] for s in manifest["samples"]]
        assert splits == ["train"] * 8 + ["val"] + ["test"]
        sample = tmp_path / "d" / "sample_00000"
        for name in ("H.cten", "Y.cten", "M.cten", "HLR.cten", "meta.json"):
            assert (sample / name).exists()
        meta = json.loads((sample / "meta.json").read_text())
        assert meta["rho"] == 0.3 and meta["snr_db"] == 10.0
        assert set(meta["seeds"]) == {"channel", "mask", "noise"}

    def test_rerun_byte_identical(self, tmp_path):
        from tensorce import export_hybrid_dataset
        export_hybrid_dataset(self.CFG, 4, tmp_path / "a")
        export_hybrid_dataset(self.CFG, 4, tmp_path / "b")
        files = sorted(p.relative_to(tmp_path / "a")
                       for p in (tmp_path / "a").rglob("*") if p.is_file())
        assert files
        for rel in files:
            assert (tmp_path / "a" / rel).read_bytes() \
                == (tmp_path / "b" / rel).read_bytes(), rel

    def test_mask_consistent_with_observation(self, tmp_path):
        from tensorce import export_hybrid_dataset
        export_hybrid_dataset(self.CFG, 2, tmp_path / "d")
        sample = tmp_path / "d" / "sample_00001"
        y = read_cten(sample / "Y.cten")
        m = read_cten(sample / "M.cten").astype(bool)
        assert np.all(y[~m] == 0)
        assert np.any(y[m] != 0)

    def test_completion_helps_and_residual_fraction(self, tmp_path):
        # over 100 samples at rho = 0.08 on the rich surrogate the tucker
        # output beats zero filling on >= 90% of samples, and the residual
        # energy fraction is strictly inside (0, 1)
        from tensorce import export_hybrid_dataset
        cfg = ExportConfig(dims=(16, 32, 64), n_paths=5, diffuse_fraction=0.3,
                           rho=0.08, snr_db=10.0, ranks=(4, 4, 8),
                           base_seed=13)
        out = tmp_path / "helps"
        export_hybrid_dataset(cfg, 100, out)
        wins = 0
        for i in range(100):
            meta = json.loads(
                (out / f"sample_{i:05d}" / "meta.json").read_text())
            assert 0.0 < meta["nmse_lr"] < 1.0
            wins += meta["nmse_lr"] <= meta["nmse_ls"]
        assert wins >= 90

    def test_multi_rho_snr_choices_recorded(self, tmp_path):
        from tensorce import export_hybrid_dataset
        cfg = ExportConfig(dims=(8, 8, 16), n_paths=2, diffuse_fraction=0.2,
                           rho=(0.1, 0.2, 0.4), snr_db=(5.0, 10.0, 15.0),
                           ranks=(2, 2, 3), base_seed=17)
        manifest = export_hybrid_dataset(cfg, 30, tmp_path / "d")
        assert manifest["rho_values"] == [0.1, 0.2, 0.4]
        seen_rho = {s["rho"] for s in manifest["samples"]}
        seen_snr = {s["snr_db"] for s in manifest["samples"]}
        assert seen_rho <= {0.1, 0.2, 0.4} and len(seen_rho) >= 2
        assert seen_snr <= {5.0, 10.0, 15.0} and len(seen_snr) >= 2
