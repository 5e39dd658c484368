"""Fake powercap sysfs trees for RAPL tests."""

from pathlib import Path
from typing import Optional


def write_zone(
    path: Path,
    energy_uj: int = 0,
    max_energy_range_uj: int = 262143328850,
    power_limit_uw: Optional[int] = None,
    name: Optional[str] = None,
) -> Path:
    """Create one zone directory with the files the backend reads."""
    path.mkdir(parents=True, exist_ok=True)
    (path / "energy_uj").write_text(f"{energy_uj}\n")
    (path / "max_energy_range_uj").write_text(f"{max_energy_range_uj}\n")
    if power_limit_uw is not None:
        (path / "constraint_0_power_limit_uw").write_text(f"{power_limit_uw}\n")
    if name is not None:
        (path / "name").write_text(f"{name}\n")
    return path


def build_powercap_tree(
    root: Path,
    package_energy_uj: int = 1_000_000,
    dram_energy_uj: int = 100_000,
    max_energy_range_uj: int = 262143328850,
    package_limit_uw: int = 165_000_000,
    dram_limit_uw: Optional[int] = None,
    with_dram: bool = True,
) -> Path:
    """
    Build ``intel-rapl:0`` with an optional ``intel-rapl:0:0`` DRAM subzone.

    The subzone sits next to the package zone, as in ``/sys/class/powercap``.
    """
    root.mkdir(parents=True, exist_ok=True)
    write_zone(
        root / "intel-rapl:0",
        energy_uj=package_energy_uj,
        max_energy_range_uj=max_energy_range_uj,
        power_limit_uw=package_limit_uw,
        name="package-0",
    )
    if with_dram:
        write_zone(
            root / "intel-rapl:0:0",
            energy_uj=dram_energy_uj,
            max_energy_range_uj=max_energy_range_uj,
            power_limit_uw=dram_limit_uw,
            name="dram",
        )
    return root


def set_energy(zone: Path, energy_uj: int) -> None:
    (zone / "energy_uj").write_text(f"{energy_uj}\n")


def read_limit(zone: Path) -> str:
    return (zone / "constraint_0_power_limit_uw").read_text().strip()


class FakeClock:
    """Monotonic clock advanced by hand, in seconds."""

    def __init__(self, start: float = 0.0):
        self.now = start

    def advance_ms(self, ms: float) -> None:
        self.now += ms / 1000.0

    def __call__(self) -> float:
        return self.now
