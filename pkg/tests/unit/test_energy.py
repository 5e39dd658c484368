"""Unit tests for energy integration."""

import pytest

from app.power import PowerDomain, PowerSample, PowerTrace, integrate_energy


def constant_trace(watts: float, dram_watts: float, seconds: float, interval_ms: float = 100.0,
                   start_ms: float = 0.0) -> PowerTrace:
    trace = PowerTrace(interval_ms=interval_ms)
    for k in range(int(round(seconds * 1000 / interval_ms))):
        t_ms = start_ms + k * interval_ms
        trace.samples.append(PowerSample(t_ms, PowerDomain.PROCESSOR, watts))
        trace.samples.append(PowerSample(t_ms, PowerDomain.DRAM, dram_watts))
    return trace


class TestIntegrateEnergy:
    """Test cases for integrate_energy."""

    def test_constant_power(self):
        """Test that 100 W for 10 s at 100 ms sampling is exactly 1000 J."""
        report = integrate_energy(constant_trace(100.0, 0.0, 10.0))

        assert report.processor_j == 1000.0
        assert report.dram_j == 0.0
        assert report.total_j == 1000.0
        assert report.runtime_ms == 10_000.0

    def test_dram_fraction(self):
        """Test the DRAM share of (100 W, 10 W)."""
        report = integrate_energy(constant_trace(100.0, 10.0, 1.0))

        assert report.dram_fraction == pytest.approx(10 / 110, abs=1e-12)

    def test_concatenation_is_additive(self):
        """Test that integrating two runs back to back adds their energy."""
        first = constant_trace(120.0, 10.0, 3.0)
        second = constant_trace(60.0, 20.0, 2.0, start_ms=3000.0)
        joined = PowerTrace(interval_ms=100.0, samples=first.samples + second.samples)

        a, b, both = integrate_energy(first), integrate_energy(second), integrate_energy(joined)

        assert both.processor_j == a.processor_j + b.processor_j == 480.0
        assert both.dram_j == a.dram_j + b.dram_j == 70.0
        assert both.runtime_ms == 5000.0

    def test_empty_trace(self):
        """Test that an empty trace integrates to zero."""
        report = integrate_energy(PowerTrace(interval_ms=100.0))

        assert report.total_j == 0.0
        assert report.runtime_ms == 0.0
        assert report.dram_fraction == 0.0

    def test_missing_samples_contribute_nothing(self):
        """Test that gaps reduce energy rather than being interpolated."""
        trace = constant_trace(100.0, 0.0, 1.0)
        del trace.samples[0:2]
        trace.missing = 2

        assert integrate_energy(trace).processor_j == 90.0


class TestPowerSample:
    """Test cases for PowerSample validation."""

    def test_negative_power_rejected(self):
        """Test that negative watts are rejected."""
        from app.config import ConfigurationError

        with pytest.raises(ConfigurationError, match="nonnegative"):
            PowerSample(0.0, PowerDomain.PROCESSOR, -1.0)
