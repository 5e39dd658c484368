"""Linux powercap (Intel RAPL) backend.

Layout under the powercap root::

    intel-rapl:<P>/energy_uj                      package energy, ASCII µJ
    intel-rapl:<P>/max_energy_range_uj            counter wrap point
    intel-rapl:<P>/constraint_0_power_limit_uw    package cap, ASCII µW
    intel-rapl:<P>:<S>/name                       "dram" for the DRAM subzone
"""

import os
import time
from pathlib import Path
from typing import Callable, Dict, Optional, Set, Tuple

import structlog

from ..error_handler import CapabilityError
from .types import CapAck, PowerBackend, PowerCapConfig, PowerDomain

logger = structlog.get_logger(__name__)

ENERGY_FILE = "energy_uj"
MAX_RANGE_FILE = "max_energy_range_uj"
POWER_LIMIT_FILE = "constraint_0_power_limit_uw"
NAME_FILE = "name"

MICROWATTS_PER_WATT = 1_000_000


def energy_delta_uj(prev: int, curr: int, max_range_uj: int) -> int:
    """Energy between two counter reads, accounting for one wrap at ``max_range_uj``."""
    if curr >= prev:
        return curr - prev
    return (max_range_uj - prev) + curr


def watts_from_delta(delta_uj: int, dt_ms: float) -> float:
    """Average power of ``delta_uj`` microjoules spent over ``dt_ms`` milliseconds."""
    return delta_uj / dt_ms / 1000.0


def watts_to_uw(watts: float) -> int:
    return int(round(watts * MICROWATTS_PER_WATT))


class RaplZone:
    """One powercap zone directory."""

    def __init__(self, path: Path):
        self.path = Path(path)

    def _read_int(self, filename: str) -> int:
        target = self.path / filename
        try:
            return int(target.read_text().strip())
        except (OSError, ValueError) as e:
            raise CapabilityError(f"Cannot read RAPL file {target}: {e}")

    @property
    def name(self) -> str:
        try:
            return (self.path / NAME_FILE).read_text().strip()
        except OSError:
            return self.path.name

    def read_energy_uj(self) -> int:
        return self._read_int(ENERGY_FILE)

    def max_energy_range_uj(self) -> int:
        return self._read_int(MAX_RANGE_FILE)

    def has_power_limit(self) -> bool:
        return (self.path / POWER_LIMIT_FILE).exists()

    def read_power_limit_uw(self) -> int:
        return self._read_int(POWER_LIMIT_FILE)

    def power_limit_writable(self) -> bool:
        return os.access(self.path / POWER_LIMIT_FILE, os.W_OK)

    def write_power_limit_uw(self, microwatts: int) -> None:
        target = self.path / POWER_LIMIT_FILE
        try:
            target.write_text(str(microwatts))
        except OSError as e:
            raise CapabilityError(f"Cannot write RAPL power limit {target}: {e}")


class EnergyCounterStream:
    """
    Iterator over energy deltas of a zone.

    The first ``next()`` primes the counter; each subsequent ``next()`` reads
    ``energy_uj`` again and returns ``(delta_uj, dt_ms)`` since the previous
    successful read, with counter wraps resolved against ``max_energy_range_uj``.
    A failed read raises but leaves the stream usable: the next successful
    read spans the gap.
    """

    def __init__(self, zone_path: Path, clock: Callable[[], float] = time.monotonic):
        self.zone = RaplZone(zone_path)
        self.clock = clock
        self._max_range: Optional[int] = None
        self._prev: Optional[int] = None
        self._prev_t = 0.0

    def __iter__(self) -> "EnergyCounterStream":
        return self

    def __next__(self) -> Tuple[int, float]:
        if self._prev is None:
            self._max_range = self.zone.max_energy_range_uj()
            self._prev = self.zone.read_energy_uj()
            self._prev_t = self.clock()
            return 0, 0.0

        curr = self.zone.read_energy_uj()
        now = self.clock()
        delta = energy_delta_uj(self._prev, curr, self._max_range or 0)
        dt_ms = (now - self._prev_t) * 1000.0
        self._prev, self._prev_t = curr, now
        return delta, dt_ms


def rapl_read_energy_uj(
    zone_path: Path,
    clock: Callable[[], float] = time.monotonic,
) -> EnergyCounterStream:
    """
    Stream energy deltas of a zone.

    Raises (from ``next()``):
        CapabilityError: If a counter file cannot be read
    """
    return EnergyCounterStream(zone_path, clock)


def find_zones(root: Path, package: int = 0) -> Tuple[RaplZone, Optional[RaplZone]]:
    """
    Locate the package zone and its DRAM subzone under ``root``.

    Raises:
        CapabilityError: If the package zone does not exist
    """
    root = Path(root)
    package_dir = root / f"intel-rapl:{package}"
    if not (package_dir / ENERGY_FILE).exists():
        raise CapabilityError(
            f"No RAPL package zone at {package_dir} (powercap root {root}); "
            "is this an Intel system with the intel_rapl driver loaded?"
        )

    dram: Optional[RaplZone] = None
    for sub in sorted(root.glob(f"intel-rapl:{package}:*")) + sorted(package_dir.glob(f"intel-rapl:{package}:*")):
        zone = RaplZone(sub)
        if zone.name == "dram":
            dram = zone
            break

    return RaplZone(package_dir), dram


class RaplBackend(PowerBackend):
    """Power readings and caps through the powercap sysfs tree."""

    name = "rapl"

    def __init__(
        self,
        root: Path,
        package: int = 0,
        clock: Callable[[], float] = time.monotonic,
    ):
        super().__init__()
        self.root = Path(root)
        self.package = package
        self.clock = clock
        self.zones: Dict[PowerDomain, Optional[RaplZone]] = {}
        self._streams: Dict[PowerDomain, EnergyCounterStream] = {}
        self._original_limits_uw: Dict[PowerDomain, int] = {}
        self._capped: Set[PowerDomain] = set()

    def discover(self) -> "RaplBackend":
        """
        Check that counters are readable and remember the limits in place.

        Raises:
            CapabilityError: If the package zone is missing or unreadable
        """
        package_zone, dram_zone = find_zones(self.root, self.package)
        package_zone.read_energy_uj()
        package_zone.max_energy_range_uj()
        self.zones = {PowerDomain.PROCESSOR: package_zone, PowerDomain.DRAM: dram_zone}

        if dram_zone is None:
            logger.warning("No DRAM RAPL subzone found; DRAM samples will be missing", root=str(self.root))

        for domain, zone in self.zones.items():
            if zone is not None and zone.has_power_limit():
                self._original_limits_uw[domain] = zone.read_power_limit_uw()

        logger.info(
            "RAPL backend ready",
            root=str(self.root),
            package_zone=str(package_zone.path),
            dram_zone=str(dram_zone.path) if dram_zone else None,
        )
        return self

    def _zone(self, domain: PowerDomain) -> RaplZone:
        if not self.zones:
            self.discover()
        zone = self.zones.get(domain)
        if zone is None:
            raise CapabilityError(f"No RAPL zone for the {domain.value} domain under {self.root}")
        return zone

    def begin(self) -> None:
        if not self.zones:
            self.discover()
        self._streams = {}
        for domain in self.domains():
            zone = self.zones.get(domain)
            if zone is None:
                continue
            stream = rapl_read_energy_uj(zone.path, self.clock)
            next(stream)
            self._streams[domain] = stream

    def read_power(self, domain: PowerDomain) -> float:
        stream = self._streams.get(domain)
        if stream is None:
            raise CapabilityError(f"RAPL {domain.value} counter is not being sampled")
        delta_uj, dt_ms = next(stream)
        if dt_ms <= 0:
            return 0.0
        return watts_from_delta(delta_uj, dt_ms)

    def check_cap_writable(self, domain: PowerDomain) -> None:
        """
        Raises:
            CapabilityError: If the domain has no zone, no limit file, or the
                limit file is not writable by this process
        """
        zone = self._zone(domain)
        if not zone.has_power_limit():
            raise CapabilityError(f"RAPL zone {zone.path} does not expose {POWER_LIMIT_FILE}")
        if not zone.power_limit_writable():
            raise CapabilityError(
                f"RAPL power limit {zone.path / POWER_LIMIT_FILE} is not writable (capping needs root)"
            )

    def set_power_cap(self, domain: PowerDomain, cap: PowerCapConfig) -> CapAck:
        """
        Write the domain's limit in microwatts.

        An unlimited cap restores the limit found when the backend was discovered,
        and writes nothing if this backend never capped the domain.

        Raises:
            CapabilityError: If the zone has no limit file or it is not writable
        """
        zone = self._zone(domain)
        if not zone.has_power_limit():
            raise CapabilityError(f"RAPL zone {zone.path} does not expose {POWER_LIMIT_FILE}")

        limit_w = cap.limit_for(domain)
        if limit_w is None:
            original = self._original_limits_uw.get(domain)
            if original is None or domain not in self._capped:
                return CapAck(backend=self.name, domain=domain, limit_w=None)
            zone.write_power_limit_uw(original)
            self._capped.discard(domain)
        else:
            zone.write_power_limit_uw(watts_to_uw(limit_w))
            self._capped.add(domain)

        logger.info("Power cap applied", backend=self.name, domain=domain.value, limit_w=limit_w)
        return CapAck(backend=self.name, domain=domain, limit_w=limit_w)

    def close(self) -> None:
        """Restore the limits found at discovery on domains this backend capped."""
        for domain, original in self._original_limits_uw.items():
            zone = self.zones.get(domain)
            if zone is None or domain not in self._capped:
                continue
            try:
                zone.write_power_limit_uw(original)
            except CapabilityError as e:
                logger.warning("Could not restore RAPL power limit", domain=domain.value, error=str(e))
        self._capped.clear()
        self._streams = {}
