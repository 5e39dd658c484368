"""Configuration management for the mrcap benchmark harness."""

import os
from dataclasses import dataclass
from pathlib import Path

DEFAULT_POWERCAP_ROOT = "/sys/class/powercap"


class ConfigurationError(Exception):
    """Raised when configuration is invalid."""
    pass


@dataclass
class HarnessConfig:
    """Process-level configuration for the benchmark harness."""
    powercap_root: str = DEFAULT_POWERCAP_ROOT
    rapl_package: int = 0
    sample_ms: int = 100
    log_level: str = "INFO"
    log_format: str = "console"

    def __post_init__(self):
        """Validate configuration after initialization."""
        self._validate()

    def _validate(self):
        """Validate configuration values."""
        if not self.powercap_root:
            raise ConfigurationError("Powercap root must not be empty")

        if self.rapl_package < 0:
            raise ConfigurationError(f"RAPL package index cannot be negative: {self.rapl_package}")

        if self.sample_ms <= 0:
            raise ConfigurationError(f"Sample interval must be positive: {self.sample_ms}")

        if self.log_level.upper() not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ConfigurationError(f"Unknown log level: {self.log_level}")

        if self.log_format.lower() not in ("console", "json"):
            raise ConfigurationError(f"Log format must be 'console' or 'json': {self.log_format}")

    @property
    def powercap_path(self) -> Path:
        """Sysfs powercap root as a path."""
        return Path(self.powercap_root)


def load_config() -> HarnessConfig:
    """Load configuration from environment variables with defaults."""
    try:
        powercap_root = os.getenv('MRCAP_POWERCAP_ROOT', DEFAULT_POWERCAP_ROOT)

        rapl_package = int(os.getenv('MRCAP_RAPL_PACKAGE', '0'))
        sample_ms = int(os.getenv('MRCAP_SAMPLE_MS', '100'))

        log_level = os.getenv('MRCAP_LOG_LEVEL', 'INFO')
        log_format = os.getenv('MRCAP_LOG_FORMAT', 'console')

        return HarnessConfig(
            powercap_root=powercap_root,
            rapl_package=rapl_package,
            sample_ms=sample_ms,
            log_level=log_level,
            log_format=log_format
        )

    except ValueError as e:
        raise ConfigurationError(f"Invalid numeric configuration value: {e}")
