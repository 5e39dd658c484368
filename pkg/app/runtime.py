"""In-memory MapReduce engine over in-process ranks.

Stages run as map -> [combine] -> exchange -> [group_by_key -> reduce]. Each
rank is a worker thread; the exchange is the only cross-rank synchronization
point, realized with a barrier. Every output and counted metric is independent
of thread scheduling: received KVs are ordered by (sender, flush sequence).
"""

import threading
import time
from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache, reduce
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple

import structlog

from .config import ConfigurationError
from .dataset import DatasetSpec, WordChunk, generate_chunk
from .error_handler import InvariantViolation

logger = structlog.get_logger(__name__)

FNV64_OFFSET_BASIS = 0xCBF29CE484222325
FNV64_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1

# Bytes charged per KV on top of the key: one 64-bit count.
VALUE_BYTES = 8


class KeyValue(NamedTuple):
    """A ⟨key, value⟩ pair emitted by map."""
    key: bytes
    value: int


class KeyMultiValue(NamedTuple):
    """A key with all its values, as produced by grouping."""
    key: bytes
    values: List[int]


class Stage(str, Enum):
    """Pipeline stages, as reported to stage listeners."""
    MAP = "map"
    SHUFFLE = "shuffle"
    REDUCE = "reduce"
    IDLE = "idle"


class CombineScope(str, Enum):
    """Where the combiner is applied."""
    CHUNK = "chunk"
    BUFFER = "buffer"


MapFn = Callable[[bytes], Iterable[KeyValue]]
ReduceFn = Callable[[int, int], int]
StageListener = Callable[[Stage], None]


@dataclass(frozen=True)
class PipelineConfig:
    """Wiring of one pipeline run."""
    num_ranks: int = 1
    buffer_capacity_kvs: int = 4096
    combiner_enabled: bool = False
    run_reduce: bool = True
    combine_scope: CombineScope = CombineScope.CHUNK

    def __post_init__(self):
        """Validate configuration after initialization."""
        if self.num_ranks < 1:
            raise ConfigurationError(f"num_ranks must be at least 1: {self.num_ranks}")
        if self.buffer_capacity_kvs < 1:
            raise ConfigurationError(
                f"buffer_capacity_kvs must be at least 1: {self.buffer_capacity_kvs}"
            )
        # Coerce plain strings coming from the CLI.
        object.__setattr__(self, "combine_scope", CombineScope(self.combine_scope))


@dataclass
class RankWork:
    """Counted work of a single rank."""
    map_kvs: int = 0
    combined_kvs: int = 0
    sent_kvs: int = 0
    received_kvs: int = 0
    flushes: int = 0


@dataclass
class RunMetrics:
    """Stage timings and shuffle accounting for one pipeline run."""
    map_ms: float = 0.0
    shuffle_ms: float = 0.0
    reduce_ms: float = 0.0
    shuffle_kv_count: int = 0
    shuffle_bytes: int = 0
    flush_count: int = 0
    avg_buffer_fill_ratio: float = 0.0
    per_rank: List[RankWork] = field(default_factory=list)

    def counted(self) -> Tuple[int, int, int, float]:
        """The scheduling-independent part of the metrics."""
        return (
            self.shuffle_kv_count,
            self.shuffle_bytes,
            self.flush_count,
            self.avg_buffer_fill_ratio,
        )


@dataclass
class ExchangeResult:
    """What an exchange delivered, per destination rank."""
    received: List[List[KeyValue]]
    flush_sizes: List[List[int]]

    @property
    def flush_count(self) -> int:
        return sum(len(sizes) for sizes in self.flush_sizes)


def fnv1a_64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = FNV64_OFFSET_BASIS
    for byte in data:
        h = ((h ^ byte) * FNV64_PRIME) & _MASK64
    return h


@lru_cache(maxsize=1 << 18)
def partition(key: bytes, num_ranks: int) -> int:
    """Rank that owns ``key``: FNV-1a 64 of the key modulo ``num_ranks``."""
    return fnv1a_64(key) % num_ranks


def wordcount_map(word: bytes) -> Iterable[KeyValue]:
    """Wordcount map function: one (word, 1) per word."""
    yield KeyValue(word, 1)


def wordcount_reduce(left: int, right: int) -> int:
    """Wordcount reduce function: addition."""
    return left + right


def map_stage(chunk: WordChunk, map_fn: MapFn = wordcount_map) -> List[KeyValue]:
    """Apply ``map_fn`` to every word of the chunk, in input order."""
    return [kv for word in chunk.words for kv in map_fn(word)]


def combine_local(kvs: Iterable[KeyValue], reduce_fn: ReduceFn = wordcount_reduce) -> List[KeyValue]:
    """
    Fold values of matching keys before shuffling.

    One KV per distinct key, ordered by first appearance; ``reduce_fn`` must be
    associative and commutative.
    """
    acc: Dict[bytes, int] = {}
    for key, value in kvs:
        if key in acc:
            acc[key] = reduce_fn(acc[key], value)
        else:
            acc[key] = value
    return [KeyValue(key, value) for key, value in acc.items()]


def route(kvs: Iterable[KeyValue], num_ranks: int) -> List[List[KeyValue]]:
    """Split KVs into per-destination queues, preserving order within each."""
    outbox: List[List[KeyValue]] = [[] for _ in range(num_ranks)]
    for kv in kvs:
        outbox[partition(kv.key, num_ranks)].append(kv)
    return outbox


def group_by_key(received: Iterable[KeyValue]) -> List[KeyMultiValue]:
    """Collect values per key; keys in first-appearance order, values in arrival order."""
    groups: Dict[bytes, List[int]] = {}
    for key, value in received:
        values = groups.get(key)
        if values is None:
            groups[key] = [value]
        else:
            values.append(value)
    return [KeyMultiValue(key, values) for key, values in groups.items()]


def reduce_stage(kmvs: Iterable[KeyMultiValue], reduce_fn: ReduceFn = wordcount_reduce) -> List[KeyValue]:
    """Merge each KMV's values into a single KV."""
    out = []
    for key, values in kmvs:
        if not values:
            raise InvariantViolation(f"Empty value list for key {key!r}")
        out.append(KeyValue(key, reduce(reduce_fn, values)))
    return out


class Transport(ABC):
    """Carries flushed buffers between ranks."""

    @abstractmethod
    def send(self, src: int, dst: int, batch: List[KeyValue]) -> None:
        """Deliver one flushed buffer from ``src`` to ``dst``."""

    @abstractmethod
    def collect(self, dst: int) -> List[KeyValue]:
        """Everything sent to ``dst``, ordered by sender then flush sequence."""


class InProcessTransport(Transport):
    """Mailboxes in shared memory; slot (dst, src) is written only by ``src``."""

    def __init__(self, num_ranks: int):
        self.num_ranks = num_ranks
        self._slots: List[List[List[List[KeyValue]]]] = [
            [[] for _ in range(num_ranks)] for _ in range(num_ranks)
        ]

    def send(self, src: int, dst: int, batch: List[KeyValue]) -> None:
        self._slots[dst][src].append(batch)

    def collect(self, dst: int) -> List[KeyValue]:
        received: List[KeyValue] = []
        for batches in self._slots[dst]:
            for batch in batches:
                received.extend(batch)
        return received


def send_rank(
    rank: int,
    outbox: Sequence[List[KeyValue]],
    cfg: PipelineConfig,
    transport: Transport,
    reduce_fn: ReduceFn = wordcount_reduce,
) -> List[int]:
    """
    Flush one rank's outbox through the transport.

    Buffers hold at most ``buffer_capacity_kvs`` KVs per destination; the last
    buffer of each destination is flushed partially filled.

    Returns:
        The size of every flush, in flush order

    Raises:
        InvariantViolation: If a KV sits in the queue of a rank that does not own it
    """
    capacity = cfg.buffer_capacity_kvs
    per_buffer_combine = cfg.combiner_enabled and cfg.combine_scope == CombineScope.BUFFER
    sizes: List[int] = []

    for dst, queue in enumerate(outbox):
        for kv in queue:
            if partition(kv.key, cfg.num_ranks) != dst:
                raise InvariantViolation(
                    f"Misrouted KV {kv.key!r} from rank {rank}: queued for {dst}, "
                    f"owned by {partition(kv.key, cfg.num_ranks)}"
                )
        for start in range(0, len(queue), capacity):
            batch = queue[start:start + capacity]
            if per_buffer_combine:
                batch = combine_local(batch, reduce_fn)
            transport.send(rank, dst, batch)
            sizes.append(len(batch))

    return sizes


def exchange(
    outboxes: Sequence[Sequence[List[KeyValue]]],
    cfg: PipelineConfig,
    transport: Optional[Transport] = None,
) -> ExchangeResult:
    """
    All-to-all exchange of every rank's per-destination queues.

    Every KV is delivered exactly once to its owner, FIFO per
    (sender, destination) pair.
    """
    if len(outboxes) != cfg.num_ranks:
        raise InvariantViolation(
            f"Got {len(outboxes)} outboxes for {cfg.num_ranks} ranks"
        )
    transport = transport or InProcessTransport(cfg.num_ranks)
    flush_sizes = [send_rank(rank, outbox, cfg, transport) for rank, outbox in enumerate(outboxes)]
    received = [transport.collect(rank) for rank in range(cfg.num_ranks)]
    return ExchangeResult(received=received, flush_sizes=flush_sizes)


@dataclass
class _RankOutcome:
    output: List[KeyValue]
    work: RankWork
    flush_sizes: List[int]
    shuffle_bytes: int
    map_ms: float
    shuffle_ms: float
    reduce_ms: float


def _elapsed_ms(start: float) -> float:
    return (time.perf_counter() - start) * 1000.0


class _Pipeline:
    """One run of the pipeline: shared state for the rank workers."""

    def __init__(
        self,
        cfg: PipelineConfig,
        spec: DatasetSpec,
        map_fn: MapFn,
        reduce_fn: ReduceFn,
        listener: Optional[StageListener],
        transport: Transport,
    ):
        self.cfg = cfg
        self.spec = spec
        self.map_fn = map_fn
        self.reduce_fn = reduce_fn
        self.listener = listener
        self.transport = transport
        self.barrier = threading.Barrier(cfg.num_ranks)

    def _enter(self, rank: int, stage: Stage) -> None:
        self.barrier.wait()
        if rank == 0 and self.listener is not None:
            self.listener(stage)

    def run_rank(self, rank: int) -> _RankOutcome:
        try:
            return self._run_rank(rank)
        except threading.BrokenBarrierError:
            raise
        except BaseException:
            self.barrier.abort()
            raise

    def _run_rank(self, rank: int) -> _RankOutcome:
        cfg = self.cfg
        chunk = generate_chunk(self.spec, rank, cfg.num_ranks)
        work = RankWork(map_kvs=len(chunk))

        self._enter(rank, Stage.MAP)
        start = time.perf_counter()
        kvs = map_stage(chunk, self.map_fn)
        if cfg.combiner_enabled:
            work.combined_kvs = len(kvs)
        if cfg.combiner_enabled and cfg.combine_scope == CombineScope.CHUNK:
            kvs = combine_local(kvs, self.reduce_fn)
        outbox = route(kvs, cfg.num_ranks)
        map_ms = _elapsed_ms(start)

        self._enter(rank, Stage.SHUFFLE)
        start = time.perf_counter()
        flush_sizes = send_rank(rank, outbox, cfg, self.transport, self.reduce_fn)
        self.barrier.wait()
        received = self.transport.collect(rank)
        shuffle_ms = _elapsed_ms(start)

        work.sent_kvs = sum(flush_sizes)
        work.flushes = len(flush_sizes)
        work.received_kvs = len(received)
        shuffle_bytes = sum(len(kv.key) + VALUE_BYTES for kv in received)

        output: List[KeyValue] = []
        reduce_ms = 0.0
        if cfg.run_reduce:
            self._enter(rank, Stage.REDUCE)
            start = time.perf_counter()
            output = reduce_stage(group_by_key(received), self.reduce_fn)
            reduce_ms = _elapsed_ms(start)

        self._enter(rank, Stage.IDLE)
        return _RankOutcome(
            output=output,
            work=work,
            flush_sizes=flush_sizes,
            shuffle_bytes=shuffle_bytes,
            map_ms=map_ms,
            shuffle_ms=shuffle_ms,
            reduce_ms=reduce_ms,
        )

    def execute(self) -> List[_RankOutcome]:
        if self.cfg.num_ranks == 1:
            return [self.run_rank(0)]

        with ThreadPoolExecutor(
            max_workers=self.cfg.num_ranks, thread_name_prefix="mrcap-rank"
        ) as pool:
            futures = [pool.submit(self.run_rank, rank) for rank in range(self.cfg.num_ranks)]

        errors = [f.exception() for f in futures if f.exception() is not None]
        if errors:
            # Ranks released by an aborted barrier only report BrokenBarrierError.
            primary = [e for e in errors if not isinstance(e, threading.BrokenBarrierError)]
            raise (primary or errors)[0]
        return [f.result() for f in futures]


def run_pipeline(
    cfg: PipelineConfig,
    spec: DatasetSpec,
    *,
    map_fn: MapFn = wordcount_map,
    reduce_fn: ReduceFn = wordcount_reduce,
    listener: Optional[StageListener] = None,
    transport: Optional[Transport] = None,
) -> Tuple[List[List[KeyValue]], RunMetrics]:
    """
    Run map -> [combine] -> exchange -> [group_by_key -> reduce] over ``spec``.

    Args:
        cfg: Pipeline wiring
        spec: Dataset to generate and count
        map_fn: Map function applied per word
        reduce_fn: Associative, commutative value fold
        listener: Called by rank 0 when every rank has entered a stage
        transport: Exchange transport (in-process by default)

    Returns:
        Per-rank output KVs (empty without reduce) and the run's metrics
    """
    if cfg.num_ranks > spec.total_words:
        raise ConfigurationError(
            f"num_ranks ({cfg.num_ranks}) cannot exceed total_words ({spec.total_words})"
        )

    logger.debug(
        "Pipeline starting",
        num_ranks=cfg.num_ranks,
        buffer_capacity_kvs=cfg.buffer_capacity_kvs,
        combiner_enabled=cfg.combiner_enabled,
        combine_scope=cfg.combine_scope.value,
        run_reduce=cfg.run_reduce,
        total_words=spec.total_words,
        unique_words=spec.unique_words,
    )

    pipeline = _Pipeline(
        cfg, spec, map_fn, reduce_fn, listener,
        transport or InProcessTransport(cfg.num_ranks),
    )
    outcomes = pipeline.execute()

    all_sizes = [size for o in outcomes for size in o.flush_sizes]
    metrics = RunMetrics(
        map_ms=max(o.map_ms for o in outcomes),
        shuffle_ms=max(o.shuffle_ms for o in outcomes),
        reduce_ms=max(o.reduce_ms for o in outcomes),
        shuffle_kv_count=sum(o.work.received_kvs for o in outcomes),
        shuffle_bytes=sum(o.shuffle_bytes for o in outcomes),
        flush_count=len(all_sizes),
        avg_buffer_fill_ratio=(
            sum(all_sizes) / (len(all_sizes) * cfg.buffer_capacity_kvs) if all_sizes else 0.0
        ),
        per_rank=[o.work for o in outcomes],
    )

    sent = sum(o.work.sent_kvs for o in outcomes)
    if sent != metrics.shuffle_kv_count:
        raise InvariantViolation(
            f"Exchange lost KVs: sent {sent}, delivered {metrics.shuffle_kv_count}"
        )

    logger.debug(
        "Pipeline finished",
        shuffle_kvs=metrics.shuffle_kv_count,
        flush_count=metrics.flush_count,
        map_ms=round(metrics.map_ms, 3),
        shuffle_ms=round(metrics.shuffle_ms, 3),
        reduce_ms=round(metrics.reduce_ms, 3),
    )
    return [o.output for o in outcomes], metrics
