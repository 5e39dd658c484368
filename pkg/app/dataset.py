"""Deterministic synthetic word datasets for the wordcount mini-apps.

Words are fixed-width base-26 renderings of a vocabulary index over 'a'..'z'.
Each rank's chunk is drawn independently by a counter-based generator keyed on
(seed, rank, position): the SplitMix64 finalizer applied to
``stream_key(seed, rank) + (position + 1) * 0x9E3779B97F4A7C15`` (mod 2**64),
reduced modulo the vocabulary size. The modulo bias is below U / 2**64 and is
accepted. CSV-level reproducibility depends on this exact construction, so do
not change it without bumping the results schema.
"""

from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Tuple

import numpy as np
import structlog

from .config import ConfigurationError
from .error_handler import UsageError

logger = structlog.get_logger(__name__)

ALPHABET = b"abcdefghijklmnopqrstuvwxyz"
MAX_SEED = (1 << 64) - 1

_GOLDEN_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_2 = np.uint64(0x94D049BB133111EB)


@dataclass(frozen=True)
class DatasetSpec:
    """Description of a synthetic word dataset."""
    total_words: int
    unique_words: int
    seed: int = 0
    word_len: int = 6

    def __post_init__(self):
        """Validate the spec after initialization."""
        self._validate()

    def _validate(self):
        if self.unique_words < 1:
            raise ConfigurationError(f"unique_words must be at least 1: {self.unique_words}")

        if self.total_words < self.unique_words:
            raise ConfigurationError(
                f"total_words ({self.total_words}) must be >= unique_words ({self.unique_words})"
            )

        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer: {self.seed}")

        if self.word_len < 1:
            raise ConfigurationError(f"word_len must be positive: {self.word_len}")

        if 26 ** self.word_len < self.unique_words:
            raise ConfigurationError(
                f"Encoding overflow: {self.unique_words} unique words do not fit in "
                f"{self.word_len} base-26 characters (capacity {26 ** self.word_len})"
            )


@dataclass(frozen=True)
class WordChunk:
    """The slice of the dataset a single rank maps over."""
    rank: int
    words: List[bytes] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.words)


def encode_word(index: int, word_len: int) -> bytes:
    """Render ``index`` in base 26 over 'a'..'z', left-padded with 'a'."""
    out = bytearray(ALPHABET[0:1] * word_len)
    pos = word_len - 1
    while index and pos >= 0:
        index, digit = divmod(index, 26)
        out[pos] = ALPHABET[digit]
        pos -= 1
    if index:
        raise ConfigurationError(f"Word index does not fit in {word_len} characters")
    return bytes(out)


@lru_cache(maxsize=32)
def _vocabulary(unique_words: int, word_len: int) -> Tuple[bytes, ...]:
    return tuple(encode_word(i, word_len) for i in range(unique_words))


def vocabulary(spec: DatasetSpec) -> List[bytes]:
    """
    Return the spec's vocabulary: exactly ``unique_words`` distinct words.

    Word ``i`` is the base-26 rendering of ``i``, so the list is sorted and
    stable across calls.
    """
    return list(_vocabulary(spec.unique_words, spec.word_len))


def chunk_length(total_words: int, rank: int, num_ranks: int) -> int:
    """Block decomposition: the first ``N mod R`` ranks get one extra word."""
    base, extra = divmod(total_words, num_ranks)
    return base + (1 if rank < extra else 0)


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX_1
    z = (z ^ (z >> np.uint64(27))) * _MIX_2
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, rank: int) -> np.uint64:
    """Per-rank key of the counter-based generator."""
    with np.errstate(over="ignore"):
        rank_term = _mix64(np.array([rank + 1], dtype=np.uint64) * _GOLDEN_GAMMA)
        return _mix64(np.array([seed], dtype=np.uint64) ^ rank_term)[0]


def _check_rank(spec: DatasetSpec, rank: int, num_ranks: int) -> None:
    if num_ranks < 1:
        raise UsageError(f"num_ranks must be at least 1: {num_ranks}")
    if num_ranks > spec.total_words:
        raise UsageError(
            f"num_ranks ({num_ranks}) cannot exceed total_words ({spec.total_words})"
        )
    if not 0 <= rank < num_ranks:
        raise UsageError(f"rank {rank} out of range for {num_ranks} ranks")


def chunk_indices(spec: DatasetSpec, rank: int, num_ranks: int) -> np.ndarray:
    """Vocabulary indices of ``rank``'s chunk, in position order."""
    _check_rank(spec, rank, num_ranks)
    length = chunk_length(spec.total_words, rank, num_ranks)
    key = stream_key(spec.seed, rank)

    with np.errstate(over="ignore"):
        counters = np.arange(1, length + 1, dtype=np.uint64) * _GOLDEN_GAMMA + key
        return _mix64(counters) % np.uint64(spec.unique_words)


def generate_chunk(spec: DatasetSpec, rank: int, num_ranks: int) -> WordChunk:
    """
    Generate the chunk of words mapped by ``rank`` out of ``num_ranks``.

    Any chunk can be regenerated in isolation; equal arguments yield
    byte-identical chunks.

    Raises:
        UsageError: If ``rank`` is out of range or ``num_ranks > total_words``
    """
    vocab = _vocabulary(spec.unique_words, spec.word_len)
    indices = chunk_indices(spec, rank, num_ranks)
    words = [vocab[i] for i in indices.tolist()]

    logger.debug(
        "Generated chunk",
        rank=rank,
        num_ranks=num_ranks,
        words=len(words),
        seed=spec.seed
    )
    return WordChunk(rank=rank, words=words)


def expected_counts(spec: DatasetSpec, num_ranks: int) -> Dict[bytes, int]:
    """
    Count every word of every chunk serially.

    This is the correctness oracle for the wordcount mini-apps and shares
    nothing with the runtime except chunk generation.
    """
    counts: Counter = Counter()
    for rank in range(num_ranks):
        counts.update(generate_chunk(spec, rank, num_ranks).words)
    return dict(counts)


def combinability(chunk: WordChunk) -> float:
    """
    Fraction of the chunk a perfect pre-shuffle combiner would eliminate.

    Defined as ``(len - distinct) / len``; an empty chunk has combinability 0.
    """
    n = len(chunk.words)
    if n == 0:
        return 0.0
    return (n - len(set(chunk.words))) / n


def mean_combinability(spec: DatasetSpec, num_ranks: int) -> float:
    """
    Average ``combinability`` over the ``num_ranks`` chunks of ``spec``.

    Works on vocabulary indices rather than encoded words; the two agree
    because encoding is one-to-one.
    """
    total = 0.0
    for rank in range(num_ranks):
        indices = chunk_indices(spec, rank, num_ranks)
        if len(indices):
            total += (len(indices) - len(np.unique(indices))) / len(indices)
    return total / num_ranks


def min_word_len(unique_words: int, default: int = 6) -> int:
    """Shortest word length, at least ``default``, that can encode ``unique_words`` words."""
    word_len = default
    while 26 ** word_len < unique_words:
        word_len += 1
    return word_len
