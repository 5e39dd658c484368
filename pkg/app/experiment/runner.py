"""Sweep runner: apps x datasets x caps x replications."""

import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..config import ConfigurationError, HarnessConfig
from ..dataset import DatasetSpec
from ..error_handler import (
    CapabilityError,
    ErrorClassifier,
    ErrorContext,
    ErrorStatistics,
    MrcapError,
    WorkloadError,
)
from ..logging_config import StructuredLogger
from ..miniapps import MiniApp, run_app
from ..power import (
    PowerBackend,
    PowerCapConfig,
    PowerDomain,
    PowerTrace,
    RaplBackend,
    SimBackend,
    SimPowerModel,
    integrate_energy,
    set_power_cap,
    stage_script,
    start_sampler,
    stop_sampler,
)
from ..runtime import CombineScope, RunMetrics, Stage
from .results import ResultRow, ResultWriter, trace_filename, write_trace

logger = structlog.get_logger(__name__)
ops_logger = StructuredLogger(__name__)


class BackendKind(str, Enum):
    """Power backends selectable from the CLI."""
    SIM = "sim"
    RAPL = "rapl"


class ExperimentConfig(BaseModel):
    """A full sweep matrix and where its outputs go."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    apps: List[MiniApp] = Field(min_length=1)
    total_words: int = Field(ge=1)
    unique_words: int = Field(default=72, ge=1)
    unique_words_sweep: Optional[List[int]] = None
    seed: int = Field(default=0, ge=0, lt=1 << 64)
    word_len: int = Field(default=6, ge=1)
    ranks: int = Field(default=4, ge=1)
    buffer_capacity: int = Field(default=4096, ge=1)
    combine_scope: CombineScope = CombineScope.CHUNK
    caps: List[PowerCapConfig] = Field(min_length=1)
    backend: BackendKind = BackendKind.SIM
    sim_model: SimPowerModel = Field(default_factory=SimPowerModel)
    reps: int = Field(default=3, ge=1)
    sample_ms: float = Field(default=100.0, gt=0)
    out: Path = Path("results.csv")
    trace_dir: Optional[Path] = None
    validate_counts: bool = False

    @field_validator("unique_words_sweep")
    @classmethod
    def validate_sweep(cls, v):
        if v is not None:
            if not v:
                raise ValueError("unique_words_sweep must not be empty")
            if any(u < 1 for u in v):
                raise ValueError("unique_words_sweep values must be at least 1")
        return v

    @model_validator(mode="after")
    def validate_sizes(self):
        for unique in self.unique_word_values():
            if unique > self.total_words:
                raise ValueError(
                    f"unique_words ({unique}) cannot exceed total_words ({self.total_words})"
                )
        if self.ranks > self.total_words:
            raise ValueError(f"ranks ({self.ranks}) cannot exceed total_words ({self.total_words})")
        try:
            self.datasets()
        except ConfigurationError as e:
            raise ValueError(str(e))
        return self

    def unique_word_values(self) -> List[int]:
        return list(self.unique_words_sweep) if self.unique_words_sweep else [self.unique_words]

    def datasets(self) -> List[DatasetSpec]:
        return [
            DatasetSpec(
                total_words=self.total_words,
                unique_words=unique,
                seed=self.seed,
                word_len=self.word_len,
            )
            for unique in self.unique_word_values()
        ]

    @property
    def resolved_trace_dir(self) -> Path:
        return self.trace_dir or self.out.parent / f"{self.out.stem}_traces"


@dataclass
class CellFailure:
    """A matrix cell that did not produce a row."""
    app: str
    unique_words: int
    cap: str
    rep: int
    error: str


@dataclass
class MatrixResult:
    """Outputs of ``run_matrix``."""
    csv_path: Path
    rows: List[ResultRow] = field(default_factory=list)
    trace_paths: List[Path] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)
    statistics: Optional[dict] = None


def open_backend(cfg: ExperimentConfig, harness: HarnessConfig) -> PowerBackend:
    """
    Create and check the configured backend.

    For RAPL, the limit file of every domain a cap targets must be writable.

    Raises:
        CapabilityError: If the RAPL sysfs tree is missing or unreadable, or a
            requested cap cannot be written
    """
    if cfg.backend == BackendKind.SIM:
        return SimBackend(cfg.sim_model)
    try:
        backend = RaplBackend(harness.powercap_path, harness.rapl_package).discover()
        for domain in PowerDomain:
            if any(cap.limit_for(domain) is not None for cap in cfg.caps):
                backend.check_cap_writable(domain)
        return backend
    except CapabilityError as e:
        raise CapabilityError(f"{e}. Use --backend sim to run on the simulated power model")


def apply_cap(backend: PowerBackend, cap: PowerCapConfig) -> None:
    """Apply the processor cap, and the DRAM cap when one is given."""
    set_power_cap(backend, PowerDomain.PROCESSOR, cap)
    if cap.dram_w is not None:
        set_power_cap(backend, PowerDomain.DRAM, cap)


def _run_sim_cell(
    cfg: ExperimentConfig, backend: SimBackend, app: MiniApp, spec: DatasetSpec
) -> Tuple[RunMetrics, PowerTrace, float]:
    _, metrics = run_app(
        app, spec, cfg.ranks, cfg.buffer_capacity,
        combine_scope=cfg.combine_scope, validate=cfg.validate_counts,
    )
    durations, trace = backend.play(stage_script(backend.model, metrics, app.run_reduce), cfg.sample_ms)
    metrics.map_ms = durations.get(Stage.MAP, 0.0)
    metrics.shuffle_ms = durations.get(Stage.SHUFFLE, 0.0)
    metrics.reduce_ms = durations.get(Stage.REDUCE, 0.0)
    runtime_ms = metrics.map_ms + metrics.shuffle_ms + metrics.reduce_ms
    return metrics, trace, runtime_ms


def _run_measured_cell(
    cfg: ExperimentConfig, backend: PowerBackend, app: MiniApp, spec: DatasetSpec
) -> Tuple[RunMetrics, PowerTrace, float]:
    sampler = start_sampler(backend, cfg.sample_ms)
    started = time.perf_counter()
    try:
        _, metrics = run_app(
            app, spec, cfg.ranks, cfg.buffer_capacity,
            combine_scope=cfg.combine_scope, validate=cfg.validate_counts,
        )
    finally:
        runtime_ms = (time.perf_counter() - started) * 1000.0
        trace = stop_sampler(sampler)
    if trace.missing:
        logger.warning("Power samples missing", app=app.value, missing=trace.missing)
    return metrics, trace, runtime_ms


def run_cell(
    cfg: ExperimentConfig,
    backend: PowerBackend,
    app: MiniApp,
    spec: DatasetSpec,
    cap: PowerCapConfig,
    rep: int,
) -> Tuple[ResultRow, PowerTrace]:
    """
    Run one (app, dataset, cap, rep) cell and build its result row.

    Raises:
        WorkloadError: If the run fails with anything other than a harness error
    """
    try:
        apply_cap(backend, cap)
        if isinstance(backend, SimBackend):
            metrics, trace, runtime_ms = _run_sim_cell(cfg, backend, app, spec)
        else:
            metrics, trace, runtime_ms = _run_measured_cell(cfg, backend, app, spec)
    except MrcapError:
        raise
    except Exception as e:
        raise WorkloadError(f"{app.value} run failed: {e}") from e

    energy = integrate_energy(trace)
    row = ResultRow(
        app=app.value,
        backend=backend.name,
        total_words=spec.total_words,
        unique_words=spec.unique_words,
        seed=spec.seed,
        ranks=cfg.ranks,
        cap_w=cap.label,
        rep=rep,
        runtime_ms=runtime_ms,
        map_ms=metrics.map_ms,
        shuffle_ms=metrics.shuffle_ms,
        reduce_ms=metrics.reduce_ms,
        proc_energy_j=energy.processor_j,
        dram_energy_j=energy.dram_j,
        dram_fraction=energy.dram_fraction,
        shuffle_kvs=metrics.shuffle_kv_count,
        shuffle_bytes=metrics.shuffle_bytes,
        flush_count=metrics.flush_count,
        avg_fill_ratio=metrics.avg_buffer_fill_ratio,
    )
    return row, trace


def run_matrix(cfg: ExperimentConfig, harness: Optional[HarnessConfig] = None) -> MatrixResult:
    """
    Execute every cell of the matrix sequentially.

    Rows are appended in (app, unique_words, cap, rep) order; each run's trace
    goes to its own file, with the first rep flagged for plotting. A failing
    cell is logged and counted and the matrix continues.

    Raises:
        CapabilityError: If the backend is unusable; raised before any run
    """
    harness = harness or HarnessConfig()
    backend = open_backend(cfg, harness)
    stats = ErrorStatistics()
    result = MatrixResult(csv_path=cfg.out)
    trace_dir = cfg.resolved_trace_dir

    logger.info(
        "Starting matrix",
        apps=[a.value for a in cfg.apps],
        unique_words=cfg.unique_word_values(),
        caps=[c.label for c in cfg.caps],
        reps=cfg.reps,
        backend=backend.name,
        out=str(cfg.out),
    )

    try:
        with ResultWriter(cfg.out) as writer:
            for app in cfg.apps:
                for spec in cfg.datasets():
                    for cap in cfg.caps:
                        for rep in range(1, cfg.reps + 1):
                            context = ops_logger.log_operation_start(
                                "cell", app=app.value, unique_words=spec.unique_words,
                                cap=cap.label, rep=rep,
                            )
                            started = time.monotonic()
                            try:
                                row, trace = run_cell(cfg, backend, app, spec, cap, rep)
                            except Exception as e:
                                info = ErrorClassifier.classify_error(
                                    e, ErrorContext(operation="cell", parameters=context)
                                )
                                stats.record_error("cell", info.category)
                                ops_logger.log_operation_error(context, e, error_category=info.category.value)
                                result.failures.append(
                                    CellFailure(app.value, spec.unique_words, cap.label, rep, str(e))
                                )
                                continue

                            stats.record_success("cell", time.monotonic() - started)
                            writer.write(row)
                            result.rows.append(row)
                            trace_path = write_trace(
                                trace_dir / trace_filename(app.value, spec.unique_words, cap.label, rep),
                                trace,
                                {
                                    "app": app.value,
                                    "cap": cap.label,
                                    "rep": rep,
                                    "unique_words": spec.unique_words,
                                    "first_rep": int(rep == 1),
                                },
                            )
                            result.trace_paths.append(trace_path)
                            ops_logger.log_operation_success(
                                context, runtime_ms=row.runtime_ms, shuffle_kvs=row.shuffle_kvs
                            )
    finally:
        backend.close()

    result.statistics = stats.get_statistics()
    logger.info(
        "Matrix finished",
        rows=len(result.rows),
        failures=len(result.failures),
        out=str(cfg.out),
        trace_dir=str(trace_dir),
    )
    return result
