"""Fixed backhaul power-control coefficients.

Each scheme picks the smallest common power ratio ``K_b`` for which the
bottleneck link can carry ``N_BS`` attocells at some reference access rate:

    MSPC  reference SINR gamma_max        (never bottlenecked)
    ASPC  reference SINR mean(gamma)
    ARPC  reference rate mean(R_a)

All exponentials go through ``log K`` so large tiers with narrow backhaul
bandwidth do not overflow.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol

from .config import SystemConfig
from .rates import backhaul_rate
from .topology import SuperCellTopology


class Scheme(str, enum.Enum):
    NPC = "NPC"
    MSPC = "MSPC"
    ASPC = "ASPC"
    ARPC = "ARPC"

    @classmethod
    def parse(cls, value: "Scheme | str") -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown power-control scheme {value!r}") from None


class _Moments(Protocol):
    gamma_max: float
    mean_sinr: float
    mean_rate: float


@dataclass(frozen=True)
class PowerControlResult:
    scheme: Scheme
    log_k_min: float
    k_min: float
    k_capped: float
    backhaul_rate: float


def _n_bs(topology: SuperCellTopology | int) -> int:
    n = topology if isinstance(topology, int) else topology.n_bs_per_branch
    if n < 1:
        raise ValueError("need at least one BS per branch")
    return int(n)


def _log_expm1(x: float) -> float:
    """``log(exp(x) - 1)`` for ``x >= 0`` without overflow."""
    if x <= 0.0:
        return -math.inf
    if x > 30.0:
        return x + math.log1p(-math.exp(-x))
    return math.log(math.expm1(x))


def _from_log(log_k: float) -> float:
    return math.exp(log_k) if log_k < 709.0 else math.inf


def log_sinr_coefficient(gamma_ref: float, n_bs: int, cfg: SystemConfig) -> float:
    """``log(((1 + gamma_ref)^(N_BS/zeta) - 1) / gamma_b)``."""
    if gamma_ref < 0:
        raise ValueError("reference SINR must be non-negative")
    x = n_bs / cfg.zeta * math.log1p(gamma_ref)
    return _log_expm1(x) - math.log(cfg.gamma_b)


def log_rate_coefficient(rate_ref: float, n_bs: int, cfg: SystemConfig) -> float:
    """``log((exp(ln2 N_BS R / (xi_b B_b)) - 1) / gamma_b)``."""
    if rate_ref < 0:
        raise ValueError("reference rate must be non-negative")
    x = math.log(2.0) * n_bs * rate_ref / (cfg.xi_b * cfg.backhaul_bandwidth_hz)
    return _log_expm1(x) - math.log(cfg.gamma_b)


def mspc_coefficient(cfg: SystemConfig, topology: SuperCellTopology | int, dist: _Moments) -> float:
    return _from_log(log_sinr_coefficient(dist.gamma_max, _n_bs(topology), cfg))


def aspc_coefficient(cfg: SystemConfig, topology: SuperCellTopology | int, dist: _Moments) -> float:
    return _from_log(log_sinr_coefficient(dist.mean_sinr, _n_bs(topology), cfg))


def arpc_coefficient(cfg: SystemConfig, topology: SuperCellTopology | int, dist: _Moments) -> float:
    return _from_log(log_rate_coefficient(dist.mean_rate, _n_bs(topology), cfg))


def cap_coefficient(k: float) -> float:
    if k < 0 or math.isnan(k):
        raise ValueError("coefficient must be non-negative")
    return min(k, 1.0)


def power_control(scheme: Scheme | str, cfg: SystemConfig, topology: SuperCellTopology | int,
                  dist: _Moments) -> PowerControlResult:
    """Coefficient of ``scheme`` with the unit cap and the resulting bottleneck rate."""
    scheme = Scheme.parse(scheme)
    n = _n_bs(topology)
    if scheme is Scheme.NPC:
        log_k = 0.0
    elif scheme is Scheme.MSPC:
        log_k = log_sinr_coefficient(dist.gamma_max, n, cfg)
    elif scheme is Scheme.ASPC:
        log_k = log_sinr_coefficient(dist.mean_sinr, n, cfg)
    else:
        log_k = log_rate_coefficient(dist.mean_rate, n, cfg)
    k = _from_log(log_k)
    k_cap = cap_coefficient(k)
    return PowerControlResult(scheme, log_k, k, k_cap, backhaul_rate(k_cap, cfg))
