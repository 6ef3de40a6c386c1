"""Simulation and scheduling toolkit for multi-tier LiFi super cells with optical backhaul."""
from .config import ConfigError, NumericalError, SystemConfig, load_config
from .topology import SuperCellTopology, build_super_cell, n_bs_per_branch, bottleneck_index, path_to
from .channel import SinrDistribution
from .rates import Policy, ScheduleVector, UeRealization
from .power import PowerControlResult, Scheme
from .bbo import BboEstimate

__version__ = "0.1.0"

__all__ = [
    "BboEstimate",
    "ConfigError",
    "NumericalError",
    "Policy",
    "PowerControlResult",
    "ScheduleVector",
    "Scheme",
    "SinrDistribution",
    "SuperCellTopology",
    "SystemConfig",
    "UeRealization",
    "bottleneck_index",
    "build_super_cell",
    "load_config",
    "n_bs_per_branch",
    "path_to",
]
