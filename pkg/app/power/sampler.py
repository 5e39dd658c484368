"""Fixed-rate power sampler running alongside the workload."""

import threading
import time
from typing import Callable, Optional

import structlog

from ..error_handler import UsageError
from .types import PowerBackend, PowerSample, PowerTrace

logger = structlog.get_logger(__name__)

DEFAULT_INTERVAL_MS = 100.0

# Failed reads logged individually before the sampler goes quiet.
_LOGGED_FAILURES = 5


class PowerSampler:
    """Reads every backend domain once per interval on a background thread.

    Tick ``k`` fires ``k`` intervals after start and is recorded at
    ``t = (k - 1) * interval``, the start of the interval it measures. The
    sampler thread is the only writer of the trace until ``stop`` returns.
    """

    def __init__(
        self,
        backend: PowerBackend,
        interval_ms: float = DEFAULT_INTERVAL_MS,
        clock: Callable[[], float] = time.monotonic,
    ):
        if interval_ms <= 0:
            raise UsageError(f"Sampling interval must be positive: {interval_ms}")
        self.backend = backend
        self.interval_ms = interval_ms
        self.clock = clock
        self.trace = PowerTrace(interval_ms=interval_ms)
        self._stop = threading.Event()
        self._thread: Optional[threading.Thread] = None
        self._stopped = False

    @property
    def failures(self) -> int:
        return self.trace.missing

    def start(self) -> "PowerSampler":
        if self._thread is not None:
            raise UsageError("Sampler already started")
        with self.backend.lock:
            self.backend.begin()
        self._thread = threading.Thread(target=self._run, name="mrcap-sampler", daemon=True)
        self._thread.start()
        logger.debug("Sampler started", backend=self.backend.name, interval_ms=self.interval_ms)
        return self

    def _run(self) -> None:
        interval_s = self.interval_ms / 1000.0
        started = self.clock()
        tick = 1
        while True:
            wait_s = started + tick * interval_s - self.clock()
            if self._stop.wait(timeout=max(0.0, wait_s)):
                return
            self._sample((tick - 1) * self.interval_ms)
            tick += 1

    def _sample(self, t_ms: float) -> None:
        with self.backend.lock:
            for domain in self.backend.domains():
                try:
                    watts = self.backend.read_power(domain)
                    self.trace.samples.append(PowerSample(t_ms=t_ms, domain=domain, watts=watts))
                except Exception as e:
                    self.trace.missing += 1
                    if self.trace.missing <= _LOGGED_FAILURES:
                        logger.warning(
                            "Power read failed; leaving a gap",
                            backend=self.backend.name,
                            domain=domain.value,
                            t_ms=t_ms,
                            error=str(e),
                        )

    def stop(self) -> PowerTrace:
        """Stop sampling and return the trace; later calls return the same trace."""
        if not self._stopped:
            self._stopped = True
            self._stop.set()
            if self._thread is not None:
                self._thread.join()
            logger.debug(
                "Sampler stopped",
                backend=self.backend.name,
                samples=len(self.trace.samples),
                missing=self.trace.missing,
            )
        return self.trace


def start_sampler(backend: PowerBackend, interval_ms: float = DEFAULT_INTERVAL_MS) -> PowerSampler:
    """Start a sampler on ``backend``."""
    return PowerSampler(backend, interval_ms).start()


def stop_sampler(sampler: PowerSampler) -> PowerTrace:
    """Stop ``sampler`` and return its trace. Idempotent."""
    return sampler.stop()
