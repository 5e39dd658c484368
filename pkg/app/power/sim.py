"""Deterministic simulated power backend.

The model is a stand-in for hardware, not a description of it: each stage draws
a nominal processor power, a cap below that draw stretches the stage by
``nominal / effective`` (the same work at lower power), and DRAM power is a
fixed share of the stage's combined power. Base stage durations come from
counted work, so simulated runs are reproducible bit-for-bit.
"""

import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import structlog
from pydantic import BaseModel, Field, field_validator

from ..error_handler import UsageError
from ..runtime import RunMetrics, Stage
from .types import CapAck, PowerBackend, PowerCapConfig, PowerDomain, PowerSample, PowerTrace

logger = structlog.get_logger(__name__)


class StageWatts(BaseModel):
    """Nominal processor watts per stage."""
    map: float = Field(default=160.0, gt=0)
    shuffle: float = Field(default=160.0, gt=0)
    reduce: float = Field(default=160.0, gt=0)
    idle: float = Field(default=60.0, gt=0)


class StageDramFraction(BaseModel):
    """DRAM share of combined processor+DRAM power per stage."""
    map: float = Field(default=0.10, ge=0, lt=1)
    shuffle: float = Field(default=0.12, ge=0, lt=1)
    reduce: float = Field(default=0.06, ge=0, lt=1)
    idle: float = Field(default=0.05, ge=0, lt=1)


class WorkCost(BaseModel):
    """Simulated cost of one KV in each kind of work, in microseconds."""
    map: float = Field(default=1.0, ge=0)
    combine: float = Field(default=2.0, ge=0)
    shuffle: float = Field(default=1.5, ge=0)
    reduce: float = Field(default=8.5, ge=0)


class SimPowerModel(BaseModel):
    """Calibration of the simulated backend.

    Defaults: every busy stage draws 160 W, DRAM takes 5-12% of the combined
    power, and the reduce cost makes GroupByKey run about 4.4x as long as
    Map+Shuffle.
    """
    processor_watts: StageWatts = Field(default_factory=StageWatts)
    dram_fraction: StageDramFraction = Field(default_factory=StageDramFraction)
    work_us_per_kv: WorkCost = Field(default_factory=WorkCost)
    flush_latency_ms: float = Field(default=0.0, ge=0)

    @field_validator("flush_latency_ms")
    @classmethod
    def validate_latency(cls, v):
        if not math.isfinite(v):
            raise ValueError("flush_latency_ms must be finite")
        return v

    @classmethod
    def from_file(cls, path: Path) -> "SimPowerModel":
        """Load a model from a JSON file; missing keys keep their defaults."""
        return cls.model_validate_json(Path(path).read_text())

    def stage_watts(self, stage: Stage) -> float:
        return getattr(self.processor_watts, Stage(stage).value)

    def stage_dram_fraction(self, stage: Stage) -> float:
        return getattr(self.dram_fraction, Stage(stage).value)


def effective_watts(model: SimPowerModel, stage: Stage, cap: PowerCapConfig) -> float:
    """Processor draw of ``stage`` under ``cap``."""
    nominal = model.stage_watts(stage)
    limit = cap.processor_w
    return nominal if limit is None else min(nominal, limit)


def dram_watts(model: SimPowerModel, stage: Stage, processor_watts: float) -> float:
    """Absolute DRAM watts that make up the stage's DRAM fraction of combined power."""
    fraction = model.stage_dram_fraction(stage)
    return processor_watts * fraction / (1.0 - fraction)


def sim_execute_stage(
    model: SimPowerModel,
    stage: Stage,
    base_duration_ms: float,
    cap: PowerCapConfig,
    interval_ms: float = 100.0,
    start_ms: float = 0.0,
) -> Tuple[float, List[PowerSample]]:
    """
    Simulate one stage under a cap.

    Samples sit on the global grid ``k * interval_ms``; the stage emits those
    with ``start_ms <= t < start_ms + duration``.

    Returns:
        Dilated duration in milliseconds and the stage's samples

    Raises:
        UsageError: If ``base_duration_ms`` is not positive
    """
    if not base_duration_ms > 0:
        raise UsageError(f"base_duration_ms must be positive: {base_duration_ms}")

    nominal = model.stage_watts(stage)
    processor = effective_watts(model, stage, cap)
    duration_ms = base_duration_ms * nominal / processor
    dram = dram_watts(model, stage, processor)
    if cap.dram_w is not None:
        dram = min(dram, cap.dram_w)

    first = math.ceil(start_ms / interval_ms)
    end = math.ceil((start_ms + duration_ms) / interval_ms)
    samples: List[PowerSample] = []
    for k in range(first, end):
        t_ms = k * interval_ms
        samples.append(PowerSample(t_ms=t_ms, domain=PowerDomain.PROCESSOR, watts=processor))
        samples.append(PowerSample(t_ms=t_ms, domain=PowerDomain.DRAM, watts=dram))

    return duration_ms, samples


def stage_script(model: SimPowerModel, metrics: RunMetrics, run_reduce: bool) -> List[Tuple[Stage, float]]:
    """
    Base (uncapped) stage durations of a run, from its counted work.

    Each stage lasts as long as its busiest rank. Stages with no work are
    dropped.
    """
    cost = model.work_us_per_kv
    ranks = metrics.per_rank

    map_ms = max((r.map_kvs * cost.map + r.combined_kvs * cost.combine) / 1000.0 for r in ranks)
    shuffle_ms = max(
        r.sent_kvs * cost.shuffle / 1000.0 + r.flushes * model.flush_latency_ms for r in ranks
    )
    script = [(Stage.MAP, map_ms), (Stage.SHUFFLE, shuffle_ms)]
    if run_reduce:
        script.append((Stage.REDUCE, max(r.received_kvs * cost.reduce / 1000.0 for r in ranks)))

    return [(stage, ms) for stage, ms in script if ms > 0]


class SimBackend(PowerBackend):
    """Simulated power backend.

    Live mode: ``enter_stage`` is the runtime's stage listener and
    ``read_power`` reports the current stage's power, for the threaded sampler.
    Playback mode: ``play`` turns a stage script into a trace on a virtual clock.
    """

    name = "sim"

    def __init__(self, model: Optional[SimPowerModel] = None):
        super().__init__()
        self.model = model or SimPowerModel()
        self.cap = PowerCapConfig()
        self.stage = Stage.IDLE

    def enter_stage(self, stage: Stage) -> None:
        self.stage = Stage(stage)

    def read_power(self, domain: PowerDomain) -> float:
        processor = effective_watts(self.model, self.stage, self.cap)
        if domain == PowerDomain.PROCESSOR:
            return processor
        dram = dram_watts(self.model, self.stage, processor)
        return dram if self.cap.dram_w is None else min(dram, self.cap.dram_w)

    def set_power_cap(self, domain: PowerDomain, cap: PowerCapConfig) -> CapAck:
        limit = cap.limit_for(domain)
        if domain == PowerDomain.PROCESSOR:
            self.cap = PowerCapConfig(processor_w=limit, dram_w=self.cap.dram_w)
        else:
            self.cap = PowerCapConfig(processor_w=self.cap.processor_w, dram_w=limit)
        logger.debug("Simulated power cap set", domain=domain.value, limit_w=limit)
        return CapAck(backend=self.name, domain=domain, limit_w=limit)

    def play(
        self,
        script: Sequence[Tuple[Stage, float]],
        interval_ms: float = 100.0,
    ) -> Tuple[Dict[Stage, float], PowerTrace]:
        """
        Run a stage script on the virtual clock under the current caps.

        Returns:
            Dilated duration per stage and the whole-run trace
        """
        durations: Dict[Stage, float] = {}
        trace = PowerTrace(interval_ms=interval_ms)
        clock_ms = 0.0
        for stage, base_ms in script:
            duration_ms, samples = sim_execute_stage(
                self.model, stage, base_ms, self.cap, interval_ms, start_ms=clock_ms
            )
            durations[stage] = durations.get(stage, 0.0) + duration_ms
            trace.samples.extend(samples)
            clock_ms += duration_ms
        return durations, trace
