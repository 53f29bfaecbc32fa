"""
Configuration and initialization module for the rearrangement toolkit.

This module provides configuration management, logging setup, and
initialization utilities shared by the command line, the demonstration
script and the tests.
"""

import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from series_core import ArithmeticMode

logger = logging.getLogger(__name__)

# Module loggers configured by setup_logging
PACKAGE_LOGGERS = (
    "series_core", "block_model", "permutation_engine", "rearranger",
    "substantial_scanner", "exports", "cli", "config",
)


@dataclass
class ArithmeticConfig:
    """Arithmetic used for terms and sums."""
    mode: str = "exact"
    float_tolerance: float = 1e-12  # reporting and verification thresholds only

    @property
    def arithmetic_mode(self) -> ArithmeticMode:
        return ArithmeticMode(self.mode)


@dataclass
class RearrangeConfig:
    """Configuration for greedy rearrangement runs."""
    initial_horizon: int = 1024
    horizon_cap: int = 2 ** 24
    growth_factor: int = 2
    default_checkpoints: List[int] = field(
        default_factory=lambda: [10, 100, 1000, 10000, 100000, 1000000])


@dataclass
class ScanConfig:
    """Configuration for substantial-property scans."""
    max_terms: int = 2 ** 17
    stability_tolerance: float = 0.01
    enable_cell_parallelization: bool = True
    max_concurrent_cells: int = 8
    stall_doublings: int = 2
    probe_steps: int = 2000
    probe_target: str = "0"


@dataclass
class SystemConfig:
    """Main system configuration."""
    log_level: str = "INFO"
    log_format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    enable_persistence: bool = False
    log_file: str = "rearrange.log"
    arithmetic: ArithmeticConfig = field(default_factory=ArithmeticConfig)
    rearrange: RearrangeConfig = field(default_factory=RearrangeConfig)
    scan: ScanConfig = field(default_factory=ScanConfig)


def _validate(config: SystemConfig) -> None:
    ArithmeticMode(config.arithmetic.mode)
    rearrange = config.rearrange
    if rearrange.initial_horizon < 1:
        raise ValueError(f"initial_horizon must be >= 1, got {rearrange.initial_horizon}")
    if rearrange.horizon_cap < rearrange.initial_horizon:
        raise ValueError(f"horizon_cap {rearrange.horizon_cap} is below initial_horizon "
                         f"{rearrange.initial_horizon}")
    if rearrange.growth_factor < 2:
        raise ValueError(f"growth_factor must be >= 2, got {rearrange.growth_factor}")
    if config.scan.max_terms < 1:
        raise ValueError(f"scan max_terms must be >= 1, got {config.scan.max_terms}")
    if config.scan.max_concurrent_cells < 1:
        raise ValueError("max_concurrent_cells must be >= 1")


class ConfigManager:
    """Manages configuration loading and validation."""

    SECTIONS = ("arithmetic", "rearrange", "scan")

    def __init__(self, config_file: Optional[str] = None):
        self.config_file = config_file
        self.system_config = SystemConfig()

        if config_file and os.path.exists(config_file):
            self.load_from_file(config_file)
        elif config_file:
            logger.warning(f"Configuration file {config_file} not found, using defaults")

    def load_from_file(self, config_file: str) -> None:
        """Load configuration from JSON file."""
        try:
            with open(config_file, "r", encoding="utf-8") as f:
                config_data = json.load(f)
            self.apply_overrides(config_data)
            logger.info(f"Configuration loaded from {config_file}")
        except Exception as e:
            logger.error(f"Failed to load configuration from {config_file}: {e}")
            raise

    def save_to_file(self, config_file: str) -> None:
        """Save current configuration to JSON file."""
        try:
            with open(config_file, "w", encoding="utf-8") as f:
                json.dump(self._config_to_dict(), f, indent=2)
                f.write("\n")
            logger.info(f"Configuration saved to {config_file}")
        except Exception as e:
            logger.error(f"Failed to save configuration to {config_file}: {e}")
            raise

    def apply_overrides(self, config_data: Dict[str, Any]) -> None:
        """Merge a sectioned dictionary into the current configuration."""
        if not isinstance(config_data, dict):
            raise ValueError("configuration must be a JSON object")
        self._update_config_from_dict(config_data)
        _validate(self.system_config)

    def _update_config_from_dict(self, config_data: Dict[str, Any]) -> None:
        for key, value in config_data.get("system", {}).items():
            if key in self.SECTIONS:
                continue
            if hasattr(self.system_config, key):
                setattr(self.system_config, key, value)
            else:
                logger.debug(f"Ignoring unknown system setting {key!r}")

        for section in self.SECTIONS:
            target = getattr(self.system_config, section)
            for key, value in config_data.get(section, {}).items():
                if hasattr(target, key):
                    setattr(target, key, value)
                else:
                    logger.debug(f"Ignoring unknown {section} setting {key!r}")

    def _config_to_dict(self) -> Dict[str, Any]:
        config = self.system_config
        return {
            "system": {
                "log_level": config.log_level,
                "log_format": config.log_format,
                "enable_persistence": config.enable_persistence,
                "log_file": config.log_file,
            },
            "arithmetic": {
                "mode": config.arithmetic.mode,
                "float_tolerance": config.arithmetic.float_tolerance,
            },
            "rearrange": {
                "initial_horizon": config.rearrange.initial_horizon,
                "horizon_cap": config.rearrange.horizon_cap,
                "growth_factor": config.rearrange.growth_factor,
                "default_checkpoints": list(config.rearrange.default_checkpoints),
            },
            "scan": {
                "max_terms": config.scan.max_terms,
                "stall_doublings": config.scan.stall_doublings,
                "stability_tolerance": config.scan.stability_tolerance,
                "enable_cell_parallelization": config.scan.enable_cell_parallelization,
                "max_concurrent_cells": config.scan.max_concurrent_cells,
                "probe_steps": config.scan.probe_steps,
                "probe_target": config.scan.probe_target,
            },
        }

    def get_arithmetic_config(self) -> ArithmeticConfig:
        return self.system_config.arithmetic

    def get_rearrange_config(self) -> RearrangeConfig:
        return self.system_config.rearrange

    def get_scan_config(self) -> ScanConfig:
        return self.system_config.scan

    def get_system_config(self) -> SystemConfig:
        return self.system_config


def setup_logging(config: SystemConfig) -> None:
    """Setup logging configuration."""
    log_level = getattr(logging, config.log_level.upper(), logging.INFO)

    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if config.enable_persistence:
        handlers.append(logging.FileHandler(config.log_file, encoding="utf-8"))

    # stderr only; stdout carries command output
    logging.basicConfig(level=log_level, format=config.log_format, handlers=handlers, force=True)

    for name in PACKAGE_LOGGERS:
        logging.getLogger(name).setLevel(log_level)


def initialize_system(config_file: Optional[str] = None,
                      use_environment: bool = True,
                      log_level: Optional[str] = None) -> ConfigManager:
    """
    Initialize the toolkit.

    Args:
        config_file: Optional path to configuration file
        use_environment: Apply RREARRANGE_* environment overrides after the file
        log_level: Overrides every other log level setting

    Returns:
        ConfigManager: Initialized configuration manager
    """
    config_manager = ConfigManager(config_file)
    if use_environment:
        overrides = load_config_from_environment()
        if overrides:
            config_manager.apply_overrides(overrides)
    if log_level:
        config_manager.get_system_config().log_level = log_level

    setup_logging(config_manager.get_system_config())
    logger.info("Rearrangement toolkit initialized")
    return config_manager


def create_default_config_file(file_path: str = "config.json") -> None:
    """Create a default configuration file."""
    ConfigManager().save_to_file(file_path)
    logger.info(f"Default configuration file created: {file_path}")


# Global configuration manager instance
_global_config_manager: Optional[ConfigManager] = None


def get_global_config() -> ConfigManager:
    """Get the global configuration manager instance."""
    global _global_config_manager
    if _global_config_manager is None:
        _global_config_manager = initialize_system()
    return _global_config_manager


def set_global_config(config_manager: Optional[ConfigManager]) -> None:
    """Set the global configuration manager instance."""
    global _global_config_manager
    _global_config_manager = config_manager


# Environment-based configuration
def load_config_from_environment() -> Dict[str, Any]:
    """Load configuration from environment variables."""
    config: Dict[str, Any] = {}

    if os.getenv("RREARRANGE_LOG_LEVEL"):
        config.setdefault("system", {})["log_level"] = os.getenv("RREARRANGE_LOG_LEVEL")

    if os.getenv("RREARRANGE_ARITHMETIC"):
        config.setdefault("arithmetic", {})["mode"] = os.getenv("RREARRANGE_ARITHMETIC").lower()

    if os.getenv("RREARRANGE_HORIZON_CAP"):
        config.setdefault("rearrange", {})["horizon_cap"] = int(os.getenv("RREARRANGE_HORIZON_CAP"))

    if os.getenv("RREARRANGE_SCAN_MAX_TERMS"):
        config.setdefault("scan", {})["max_terms"] = int(os.getenv("RREARRANGE_SCAN_MAX_TERMS"))

    if os.getenv("RREARRANGE_SCAN_PARALLEL"):
        flag = os.getenv("RREARRANGE_SCAN_PARALLEL").strip().lower()
        config.setdefault("scan", {})["enable_cell_parallelization"] = flag in ("1", "true", "yes", "on")

    return config
