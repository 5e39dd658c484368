"""Integration tests for matrix determinism, cap dilation and sampler transparency."""

import pytest

from app.dataset import DatasetSpec
from app.experiment.results import COUNTED_FIELDS, read_results
from app.experiment.runner import ExperimentConfig, run_matrix
from app.miniapps import MiniApp, run_app
from app.power import UNLIMITED, PowerCapConfig, SimBackend, start_sampler, stop_sampler

pytestmark = pytest.mark.integration

CAPS = [UNLIMITED, PowerCapConfig(processor_w=140.0), PowerCapConfig(processor_w=120.0)]


@pytest.fixture(scope="module")
def matrix(tmp_path_factory):
    """A 3 apps x 3 caps x 3 reps sim matrix."""
    out = tmp_path_factory.mktemp("matrix") / "results.csv"
    cfg = ExperimentConfig(
        apps=list(MiniApp), total_words=40_000, unique_words=72, ranks=4,
        caps=CAPS, reps=3, sample_ms=10.0, out=out,
    )
    run_matrix(cfg)
    return read_results(out)


class TestMatrix:
    """Test cases for a full simulated matrix."""

    def test_cardinality(self, matrix):
        """Test one row per (app, cap, rep)."""
        assert len(matrix) == 27
        assert matrix.groupby(["app", "cap_w"]).size().eq(3).all()

    def test_reps_identical(self, matrix):
        """Test that replications of a cell differ only in rep."""
        for _, cell in matrix.groupby(["app", "cap_w"]):
            for column in COUNTED_FIELDS + ["runtime_ms", "proc_energy_j", "dram_energy_j"]:
                assert cell[column].nunique() == 1, column

    @pytest.mark.parametrize("app", [a.value for a in MiniApp])
    def test_cap_runtime_ratios(self, matrix, app):
        """Test runtime ratios 1 : 1.143 : 1.333 for caps none, 140, 120."""
        rows = matrix[(matrix["app"] == app) & (matrix["rep"] == 1)].set_index("cap_w")
        base = rows.loc["none", "runtime_ms"]

        assert rows.loc["140", "runtime_ms"] / base == pytest.approx(160 / 140, rel=0.01)
        assert rows.loc["120", "runtime_ms"] / base == pytest.approx(160 / 120, rel=0.01)

    def test_cap_does_not_change_counts(self, matrix):
        """Test that caps change timing but never shuffle volume."""
        for _, app_rows in matrix.groupby("app"):
            assert app_rows["shuffle_kvs"].nunique() == 1

    def test_reduce_by_key_saves_movement_and_energy(self, matrix):
        """Test that the combiner cuts shuffle volume and energy."""
        first = matrix[(matrix["rep"] == 1) & (matrix["cap_w"] == "none")].set_index("app")

        assert first.loc["group_by_key", "shuffle_kvs"] == 40_000
        assert first.loc["reduce_by_key", "shuffle_kvs"] <= 4 * 72
        assert first.loc["reduce_by_key", "proc_energy_j"] < first.loc["group_by_key", "proc_energy_j"]
        assert first.loc["map_shuffle", "runtime_ms"] < first.loc["group_by_key", "runtime_ms"]

    def test_dram_fraction_band(self, matrix):
        """Test that the default model keeps DRAM between 4% and 15% of energy."""
        assert matrix["dram_fraction"].between(0.04, 0.15).all()


class TestDeterminism:
    """Test cases for run-to-run determinism."""

    def test_two_matrices_identical(self, tmp_path):
        """Test that rerunning a matrix reproduces every column."""
        def run(name):
            cfg = ExperimentConfig(
                apps=[MiniApp.REDUCE_BY_KEY], total_words=10_000, unique_words=500,
                seed=17, ranks=4, caps=[UNLIMITED], reps=1, sample_ms=10.0,
                out=tmp_path / name,
            )
            run_matrix(cfg)
            return read_results(cfg.out)

        first, second = run("a.csv"), run("b.csv")

        assert first.equals(second)

    def test_sampler_transparency(self):
        """Test that a live sampler leaves counts and shuffle volume unchanged."""
        spec = DatasetSpec(total_words=50_000, unique_words=1000, seed=5)

        counts_off, metrics_off = run_app(MiniApp.GROUP_BY_KEY, spec, 4, 1024)

        backend = SimBackend()
        sampler = start_sampler(backend, interval_ms=1.0)
        try:
            counts_on, metrics_on = run_app(
                MiniApp.GROUP_BY_KEY, spec, 4, 1024, listener=backend.enter_stage
            )
        finally:
            trace = stop_sampler(sampler)

        assert counts_on == counts_off
        assert metrics_on.counted() == metrics_off.counted()
        assert trace.interval_ms == 1.0
