"""Energy integration over fixed-rate power traces."""

import math

from .types import EnergyReport, PowerDomain, PowerTrace


def integrate_energy(trace: PowerTrace) -> EnergyReport:
    """
    Integrate a trace with the rectangle rule at the sample interval.

    Each sample stands for ``interval_ms`` of its domain's power; a missing
    sample contributes nothing. The run ends one interval after the last sample.
    """
    if not trace.samples:
        return EnergyReport(processor_j=0.0, dram_j=0.0, total_j=0.0, runtime_ms=0.0, dram_fraction=0.0)

    processor_j = math.fsum(s.watts for s in trace.for_domain(PowerDomain.PROCESSOR)) * trace.interval_ms / 1000.0
    dram_j = math.fsum(s.watts for s in trace.for_domain(PowerDomain.DRAM)) * trace.interval_ms / 1000.0
    total_j = processor_j + dram_j

    return EnergyReport(
        processor_j=processor_j,
        dram_j=dram_j,
        total_j=total_j,
        runtime_ms=max(s.t_ms for s in trace.samples) + trace.interval_ms,
        dram_fraction=dram_j / total_j if total_j > 0 else 0.0,
    )
