"""Federated distillation simulator with accumulated local updates (ALU)."""

from .config import ConfigError, RunConfig, load_config, parse_config_text
from .engine import CommLedger, Federation, RoundMetrics, RunResult, TrainingAborted, run
from .knowledge import Strategy

__all__ = [
    "CommLedger",
    "ConfigError",
    "Federation",
    "RoundMetrics",
    "RunConfig",
    "RunResult",
    "Strategy",
    "TrainingAborted",
    "load_config",
    "parse_config_text",
    "run",
]

__version__ = "0.1.0"
