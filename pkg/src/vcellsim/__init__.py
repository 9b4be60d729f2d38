"""Trace-driven discrete-event simulator of cellular downlink/uplink
communications for vehicular scenarios."""

from .config import ScenarioConfig, load_config
from .metrics import MetricsReport, write_outputs
from .scenario import run_scenario

__version__ = "0.1.0"

__all__ = [
    "MetricsReport",
    "ScenarioConfig",
    "load_config",
    "run_scenario",
    "write_outputs",
    "__version__",
]
