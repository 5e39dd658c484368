"""Power-measurement records and the backend interface."""

import math
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from ..config import ConfigurationError


class PowerDomain(str, Enum):
    """Reported power domains."""
    PROCESSOR = "processor"
    DRAM = "dram"


@dataclass(frozen=True)
class PowerSample:
    """Average power of one domain over ``[t_ms, t_ms + interval)``."""
    t_ms: float
    domain: PowerDomain
    watts: float

    def __post_init__(self):
        if self.watts < 0 or math.isnan(self.watts):
            raise ConfigurationError(f"Power sample must be nonnegative: {self.watts}")


@dataclass
class PowerTrace:
    """Fixed-rate samples of every domain; gaps are failed reads."""
    interval_ms: float
    samples: List[PowerSample] = field(default_factory=list)
    missing: int = 0

    def for_domain(self, domain: PowerDomain) -> List[PowerSample]:
        return [s for s in self.samples if s.domain == domain]

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class PowerCapConfig:
    """Per-domain power limits in watts; None means unlimited."""
    processor_w: Optional[float] = None
    dram_w: Optional[float] = None

    def __post_init__(self):
        for name in ("processor_w", "dram_w"):
            limit = getattr(self, name)
            if limit is not None and not (limit > 0 and math.isfinite(limit)):
                raise ConfigurationError(f"Power cap must be a positive number of watts: {name}={limit}")

    def limit_for(self, domain: PowerDomain) -> Optional[float]:
        return self.processor_w if domain == PowerDomain.PROCESSOR else self.dram_w

    @property
    def label(self) -> str:
        """Processor cap as written to the results: ``none`` or the watts."""
        if self.processor_w is None:
            return "none"
        return f"{self.processor_w:g}"

    @classmethod
    def parse(cls, text: str) -> "PowerCapConfig":
        """Parse one processor cap: ``none`` or a number of watts."""
        text = text.strip().lower()
        if text in ("none", "unlimited", ""):
            return cls()
        try:
            watts = float(text)
        except ValueError:
            raise ConfigurationError(f"Invalid power cap '{text}': expected watts or 'none'")
        return cls(processor_w=watts)

    @classmethod
    def parse_list(cls, text: str) -> List["PowerCapConfig"]:
        """Parse a comma-separated cap list such as ``none,140,120``."""
        caps = [cls.parse(item) for item in text.split(",")]
        if not caps:
            raise ConfigurationError("At least one power cap is required")
        return caps


UNLIMITED = PowerCapConfig()


@dataclass(frozen=True)
class EnergyReport:
    """Energy integrated from a trace."""
    processor_j: float
    dram_j: float
    total_j: float
    runtime_ms: float
    dram_fraction: float


@dataclass(frozen=True)
class CapAck:
    """Acknowledgment of an applied power cap."""
    backend: str
    domain: PowerDomain
    limit_w: Optional[float]


class PowerBackend(ABC):
    """Source of power readings and sink of power caps.

    Reads and cap writes are serialized through ``lock``.
    """

    name: str = "abstract"

    def __init__(self):
        self.lock = threading.Lock()

    def domains(self) -> List[PowerDomain]:
        return [PowerDomain.PROCESSOR, PowerDomain.DRAM]

    def begin(self) -> None:
        """Prime counters before the first read of a sampling run."""

    @abstractmethod
    def read_power(self, domain: PowerDomain) -> float:
        """Average watts of ``domain`` since the previous read."""

    @abstractmethod
    def set_power_cap(self, domain: PowerDomain, cap: PowerCapConfig) -> CapAck:
        """Apply ``cap``'s limit for ``domain``."""

    def close(self) -> None:
        """Release resources and undo caps where the backend supports it."""


def set_power_cap(backend: PowerBackend, domain: PowerDomain, cap: PowerCapConfig) -> CapAck:
    """Apply a cap on ``backend`` under its lock."""
    with backend.lock:
        return backend.set_power_cap(domain, cap)
