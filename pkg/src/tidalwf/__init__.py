"""Discrete-time multi-dispatcher load-balancing simulator and policy library."""

from .config import ConfigError, SystemConfig, load_config, make_config
from .engine import ExperimentResult, run_simulation
from .policies import stwf_probs, utwf_probs, wfie_probs
from .waterlevel import TargetAllocation, target_allocation, water_level

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "SystemConfig",
    "load_config",
    "make_config",
    "ExperimentResult",
    "run_simulation",
    "stwf_probs",
    "utwf_probs",
    "wfie_probs",
    "TargetAllocation",
    "target_allocation",
    "water_level",
    "__version__",
]
