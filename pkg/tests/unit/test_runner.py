"""Unit tests for the sweep runner."""

from unittest.mock import patch

import pytest
from pydantic import ValidationError

from app.config import HarnessConfig
from app.dataset import DatasetSpec
from app.error_handler import CapabilityError, WorkloadError
from app.experiment.results import RESULT_FIELDS, read_results, read_trace
from app.experiment.runner import BackendKind, ExperimentConfig, run_cell, run_matrix
from app.miniapps import MiniApp, run_app
from app.power import UNLIMITED, PowerCapConfig, SimBackend
from ..fixtures.powercap import build_powercap_tree


def small_config(tmp_path, **overrides):
    fields = dict(
        apps=list(MiniApp),
        total_words=2000,
        unique_words=72,
        ranks=2,
        caps=[UNLIMITED, PowerCapConfig(processor_w=120.0)],
        reps=2,
        sample_ms=1.0,
        out=tmp_path / "results.csv",
    )
    fields.update(overrides)
    return ExperimentConfig(**fields)


class TestExperimentConfig:
    """Test cases for ExperimentConfig validation."""

    def test_defaults(self, tmp_path):
        """Test defaults and the derived trace directory."""
        cfg = ExperimentConfig(apps=[MiniApp.GROUP_BY_KEY], total_words=100, caps=[UNLIMITED],
                               out=tmp_path / "run.csv")

        assert cfg.reps == 3
        assert cfg.sample_ms == 100.0
        assert cfg.backend == BackendKind.SIM
        assert cfg.resolved_trace_dir == tmp_path / "run_traces"

    def test_sweep_datasets(self, tmp_path):
        """Test that a sweep yields one dataset per vocabulary size."""
        cfg = small_config(tmp_path, unique_words_sweep=[72, 500])

        assert [d.unique_words for d in cfg.datasets()] == [72, 500]

    def test_zero_reps_rejected(self, tmp_path):
        """Test that at least one replication is required."""
        with pytest.raises(ValidationError):
            small_config(tmp_path, reps=0)

    def test_empty_caps_rejected(self, tmp_path):
        """Test that the cap list must not be empty."""
        with pytest.raises(ValidationError):
            small_config(tmp_path, caps=[])

    def test_unique_above_total_rejected(self, tmp_path):
        """Test that U > N is rejected up front."""
        with pytest.raises(ValidationError, match="cannot exceed total_words"):
            small_config(tmp_path, unique_words_sweep=[72, 5000])

    def test_vocabulary_larger_than_word_length_rejected(self, tmp_path):
        """Test that 27 words in one base-26 character is rejected up front."""
        with pytest.raises(ValidationError, match="do not fit"):
            small_config(tmp_path, unique_words=27, word_len=1)


class TestRunCell:
    """Test cases for run_cell."""

    def test_sim_cell_row(self, tmp_path):
        """Test the row produced for one simulated cell."""
        cfg = small_config(tmp_path)
        spec = DatasetSpec(total_words=2000, unique_words=72)

        row, trace = run_cell(cfg, SimBackend(), MiniApp.GROUP_BY_KEY, spec, UNLIMITED, 1)

        assert row.backend == "sim"
        assert row.cap_w == "none"
        assert row.shuffle_kvs == 2000
        assert row.runtime_ms == pytest.approx(row.map_ms + row.shuffle_ms + row.reduce_ms)
        assert row.proc_energy_j > 0
        assert 0.04 <= row.dram_fraction <= 0.15
        assert len(trace) > 0

    def test_cap_stretches_runtime(self, tmp_path):
        """Test that a 120 W cap stretches a sim cell by 160/120."""
        cfg = small_config(tmp_path)
        spec = DatasetSpec(total_words=2000, unique_words=72)
        backend = SimBackend()

        free, _ = run_cell(cfg, backend, MiniApp.REDUCE_BY_KEY, spec, UNLIMITED, 1)
        capped, _ = run_cell(cfg, backend, MiniApp.REDUCE_BY_KEY, spec, PowerCapConfig(processor_w=120.0), 1)

        assert capped.runtime_ms / free.runtime_ms == pytest.approx(160 / 120, rel=1e-9)
        assert capped.shuffle_kvs == free.shuffle_kvs


class TestRunMatrix:
    """Test cases for run_matrix."""

    def test_row_order_and_count(self, tmp_path):
        """Test one row per (app, cap, rep) in matrix order."""
        result = run_matrix(small_config(tmp_path))
        frame = read_results(result.csv_path)

        assert len(result.rows) == 3 * 2 * 2
        assert list(frame.columns) == RESULT_FIELDS
        assert frame["app"].tolist()[:4] == ["map_shuffle"] * 4
        assert frame["cap_w"].tolist()[:4] == ["none", "none", "120", "120"]
        assert frame["rep"].tolist()[:4] == [1, 2, 1, 2]
        assert result.failures == []

    def test_traces_written_and_flagged(self, tmp_path):
        """Test one trace per run, with only rep 1 flagged for plotting."""
        result = run_matrix(small_config(tmp_path, apps=[MiniApp.GROUP_BY_KEY], caps=[UNLIMITED]))

        assert [p.name for p in result.trace_paths] == [
            "group_by_key_u72_capnone_rep1.csv",
            "group_by_key_u72_capnone_rep2.csv",
        ]
        flags = [read_trace(p)[0]["first_rep"] for p in result.trace_paths]
        assert flags == ["1", "0"]

    def test_failing_cell_does_not_stop_matrix(self, tmp_path):
        """Test that a failed cell is recorded and the rest still run."""
        def flaky(app, *args, **kwargs):
            if app == MiniApp.MAP_SHUFFLE:
                raise WorkloadError("injected")
            return run_app(app, *args, **kwargs)

        with patch("app.experiment.runner.run_app", side_effect=flaky):
            result = run_matrix(small_config(tmp_path))

        assert len(result.rows) == 8
        assert len(result.failures) == 4
        assert {f.app for f in result.failures} == {"map_shuffle"}
        assert result.statistics["error_counts_by_category"] == {"workload": 4}
        assert len(read_results(result.csv_path)) == 8

    def test_rapl_without_powercap_fails_before_running(self, tmp_path):
        """Test that an unusable RAPL tree aborts with a hint to use sim."""
        cfg = small_config(tmp_path, backend=BackendKind.RAPL)
        harness = HarnessConfig(powercap_root=str(tmp_path / "no-powercap"))

        with pytest.raises(CapabilityError, match="--backend sim"):
            run_matrix(cfg, harness)

        assert not cfg.out.exists()

    def test_unexpected_cell_error_is_a_workload_failure(self, tmp_path):
        """Test that a non-harness exception in a cell is wrapped and counted as workload."""
        with patch("app.experiment.runner.run_app", side_effect=RuntimeError("worker crashed")):
            result = run_matrix(small_config(tmp_path, apps=[MiniApp.GROUP_BY_KEY], caps=[UNLIMITED]))

        assert result.rows == []
        assert [f.error for f in result.failures] == ["group_by_key run failed: worker crashed"] * 2
        assert result.statistics["error_counts_by_category"] == {"workload": 2}

    def test_rapl_unwritable_cap_fails_before_running(self, tmp_path):
        """Test that caps on a read-only limit file abort before the results file opens."""
        root = build_powercap_tree(tmp_path / "powercap")
        cfg = small_config(tmp_path, backend=BackendKind.RAPL)

        with patch("app.power.rapl.os.access", return_value=False):
            with pytest.raises(CapabilityError, match="not writable"):
                run_matrix(cfg, HarnessConfig(powercap_root=str(root)))

        assert not cfg.out.exists()
