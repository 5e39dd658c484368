"""Power capping and power/energy measurement."""

from .energy import integrate_energy
from .rapl import RaplBackend, energy_delta_uj, rapl_read_energy_uj, watts_from_delta
from .sampler import PowerSampler, start_sampler, stop_sampler
from .sim import SimBackend, SimPowerModel, sim_execute_stage, stage_script
from .types import (
    UNLIMITED,
    CapAck,
    EnergyReport,
    PowerBackend,
    PowerCapConfig,
    PowerDomain,
    PowerSample,
    PowerTrace,
    set_power_cap,
)

__all__ = [
    # Records
    "PowerDomain",
    "PowerSample",
    "PowerTrace",
    "PowerCapConfig",
    "UNLIMITED",
    "EnergyReport",
    "CapAck",

    # Backends
    "PowerBackend",
    "RaplBackend",
    "SimBackend",
    "SimPowerModel",
    "set_power_cap",

    # Measurement
    "PowerSampler",
    "start_sampler",
    "stop_sampler",
    "integrate_energy",
    "energy_delta_uj",
    "watts_from_delta",
    "rapl_read_energy_uj",
    "sim_execute_stage",
    "stage_script",
]
