"""The three wordcount-derived mini-apps as fixed pipeline configurations."""

from enum import Enum
from typing import Dict, List, Optional, Tuple

import structlog

from .dataset import DatasetSpec, expected_counts
from .error_handler import InvariantViolation, UsageError
from .runtime import (
    CombineScope,
    KeyValue,
    PipelineConfig,
    RunMetrics,
    StageListener,
    partition,
    run_pipeline,
)

logger = structlog.get_logger(__name__)


class MiniApp(str, Enum):
    """Wordcount mini-apps: each adds one stage or optimization to the previous."""
    MAP_SHUFFLE = "map_shuffle"
    GROUP_BY_KEY = "group_by_key"
    REDUCE_BY_KEY = "reduce_by_key"

    @property
    def combiner_enabled(self) -> bool:
        return self is MiniApp.REDUCE_BY_KEY

    @property
    def run_reduce(self) -> bool:
        return self is not MiniApp.MAP_SHUFFLE

    @classmethod
    def parse_list(cls, value: str) -> List["MiniApp"]:
        """Parse a CLI ``--app`` value: one app name or ``all``."""
        if value == "all":
            return list(cls)
        try:
            return [cls(name.strip()) for name in value.split(",")]
        except ValueError:
            choices = ", ".join([app.value for app in cls] + ["all"])
            raise UsageError(f"Unknown app '{value}'; expected one of: {choices}")


def pipeline_config(
    app: MiniApp,
    num_ranks: int,
    buffer_capacity: int,
    combine_scope: CombineScope = CombineScope.CHUNK,
) -> PipelineConfig:
    """The pipeline wiring that defines ``app``."""
    return PipelineConfig(
        num_ranks=num_ranks,
        buffer_capacity_kvs=buffer_capacity,
        combiner_enabled=app.combiner_enabled,
        run_reduce=app.run_reduce,
        combine_scope=combine_scope,
    )


def merge_counts(outputs: List[List[KeyValue]], num_ranks: int) -> Dict[bytes, int]:
    """
    Merge per-rank reduce outputs into one count map.

    Raises:
        InvariantViolation: If a key appears on a rank that does not own it or
            on more than one rank
    """
    counts: Dict[bytes, int] = {}
    for rank, output in enumerate(outputs):
        for key, value in output:
            if partition(key, num_ranks) != rank:
                raise InvariantViolation(f"Key {key!r} reduced on rank {rank}, not its owner")
            if key in counts:
                raise InvariantViolation(f"Key {key!r} reduced more than once")
            counts[key] = value
    return counts


def run_app(
    app: MiniApp,
    spec: DatasetSpec,
    num_ranks: int,
    buffer_capacity: int,
    *,
    combine_scope: CombineScope = CombineScope.CHUNK,
    listener: Optional[StageListener] = None,
    validate: bool = False,
) -> Tuple[Optional[Dict[bytes, int]], RunMetrics]:
    """
    Run one mini-app.

    Args:
        app: Which mini-app
        spec: Dataset to count
        num_ranks: Number of ranks
        buffer_capacity: Exchange buffer capacity, in KVs per destination
        combine_scope: Combiner scope for reduce_by_key
        listener: Stage listener forwarded to the runtime
        validate: Compare counts against the serial oracle

    Returns:
        Global word counts (None for map_shuffle) and the run's metrics

    Raises:
        InvariantViolation: If ``validate`` is set and the counts are wrong
    """
    app = MiniApp(app)
    cfg = pipeline_config(app, num_ranks, buffer_capacity, combine_scope)
    outputs, metrics = run_pipeline(cfg, spec, listener=listener)

    counts: Optional[Dict[bytes, int]] = None
    if app.run_reduce:
        counts = merge_counts(outputs, num_ranks)
    else:
        metrics.reduce_ms = 0.0

    if validate:
        _validate(app, spec, num_ranks, counts, metrics)

    logger.info(
        "Mini-app finished",
        app=app.value,
        total_words=spec.total_words,
        unique_words=spec.unique_words,
        ranks=num_ranks,
        shuffle_kvs=metrics.shuffle_kv_count,
        flush_count=metrics.flush_count,
    )
    return counts, metrics


def _validate(
    app: MiniApp,
    spec: DatasetSpec,
    num_ranks: int,
    counts: Optional[Dict[bytes, int]],
    metrics: RunMetrics,
) -> None:
    if counts is None:
        if metrics.shuffle_kv_count != spec.total_words:
            raise InvariantViolation(
                f"{app.value} delivered {metrics.shuffle_kv_count} KVs, "
                f"expected {spec.total_words}"
            )
        return

    oracle = expected_counts(spec, num_ranks)
    if counts != oracle:
        missing = set(oracle) - set(counts)
        wrong = [k for k in oracle if k in counts and counts[k] != oracle[k]]
        raise InvariantViolation(
            f"{app.value} counts disagree with the serial oracle: "
            f"{len(missing)} missing keys, {len(wrong)} wrong counts"
        )


def movement_reduction(
    spec: DatasetSpec,
    num_ranks: int,
    buffer_capacity: int = 4096,
) -> float:
    """
    Shuffle volume without the combiner divided by shuffle volume with it.

    Raises:
        InvariantViolation: If the combiner run shuffled nothing
    """
    _, gbk = run_app(MiniApp.GROUP_BY_KEY, spec, num_ranks, buffer_capacity)
    _, rbk = run_app(MiniApp.REDUCE_BY_KEY, spec, num_ranks, buffer_capacity)
    if rbk.shuffle_kv_count == 0:
        raise InvariantViolation("reduce_by_key shuffled no KVs; movement reduction undefined")
    return gbk.shuffle_kv_count / rbk.shuffle_kv_count
