"""Access, backhaul and end-to-end rates under user- and cell-based scheduling.

Rates are in bits/s. The production formulas assume one power ratio ``k_b``
shared by every backhaul link of the branch, which makes the tier-1 link the
only binding hop. ``*_general`` variants evaluate the full per-hop minimum
over the backhaul path and are kept as cross-checks.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .config import SystemConfig
from .topology import SuperCellTopology

SUM_TOL = 1e-9
CLAMP_TOL = 1e-12


class Policy(str, enum.Enum):
    UBS = "UBS"
    CBS = "CBS"

    @classmethod
    def parse(cls, value: "Policy | str") -> "Policy":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown policy {value!r}; expected UBS or CBS") from None


@dataclass(frozen=True)
class UeRealization:
    """One placement of ``M`` UEs over the attocells of a branch.

    UEs are stored grouped by cell: the UEs of local cell ``c`` occupy
    ``sinr[offsets[c]:offsets[c + 1]]``.
    """

    branch: int
    bs_indices: tuple[int, ...]
    counts: np.ndarray
    sinr: np.ndarray

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        sinr = np.asarray(self.sinr, dtype=float)
        if counts.ndim != 1 or counts.size != len(self.bs_indices):
            raise ValueError("counts must hold one entry per BS")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if sinr.ndim != 1 or sinr.size != int(counts.sum()):
            raise ValueError("need exactly one SINR value per UE")
        if np.any(~np.isfinite(sinr)) or np.any(sinr < 0):
            raise ValueError("SINR values must be finite and non-negative")
        counts.setflags(write=False)
        sinr.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "sinr", sinr)

    @property
    def n_bs(self) -> int:
        return len(self.bs_indices)

    @property
    def n_ues(self) -> int:
        return int(self.sinr.size)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.counts)])

    @property
    def cell_of_ue(self) -> np.ndarray:
        """Local cell index of every UE."""
        return np.repeat(np.arange(self.n_bs), self.counts)

    def local_index(self, bs: int) -> int:
        try:
            return self.bs_indices.index(bs)
        except ValueError:
            raise KeyError(f"BS {bs} is not part of this realization") from None

    def ues_of(self, bs: int) -> np.ndarray:
        c = self.local_index(bs)
        off = self.offsets
        return self.sinr[off[c]:off[c + 1]]

    def spectral_efficiency(self) -> np.ndarray:
        """``log2(1 + gamma_u)`` per UE."""
        return np.log2(1.0 + self.sinr)

    def normalized_rates(self, k_b: float, cfg: SystemConfig) -> np.ndarray:
        """Per-UE ``rho_u``: access spectral efficiency over ``zeta log2(1 + k_b gamma_b)``.

        Infinite when the backhaul carries nothing (``k_b = 0``).
        """
        denom = cfg.zeta * math.log2(1.0 + k_b * cfg.gamma_b)
        se = self.spectral_efficiency()
        if denom <= 0.0:
            return np.full_like(se, np.inf)
        return se / denom

    def cell_mean(self, values: np.ndarray) -> np.ndarray:
        """Per-cell mean of a per-UE array; 0 for empty cells."""
        values = np.asarray(values, dtype=float)
        sums = np.bincount(self.cell_of_ue, weights=values, minlength=self.n_bs)
        return np.where(self.counts > 0, sums / np.maximum(self.counts, 1), 0.0)


@dataclass(frozen=True)
class ScheduleVector:
    """Bandwidth shares of the bottleneck link, one per BS of the branch."""

    branch: int
    bs_indices: tuple[int, ...]
    mu: np.ndarray

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        if mu.ndim != 1 or mu.size != len(self.bs_indices) or mu.size == 0:
            raise ValueError("mu must hold one entry per BS")
        if np.any(~np.isfinite(mu)):
            raise ValueError("mu must be finite")
        if np.any(mu < -CLAMP_TOL) or np.any(mu > 1.0 + CLAMP_TOL):
            raise ValueError("mu entries must lie in [0, 1]")
        if abs(mu.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"mu must sum to 1, got {mu.sum()!r}")
        mu = np.clip(mu, 0.0, 1.0)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    @classmethod
    def for_realization(cls, real: UeRealization, mu) -> "ScheduleVector":
        return cls(real.branch, real.bs_indices, mu)

    def __getitem__(self, bs: int) -> float:
        try:
            return float(self.mu[self.bs_indices.index(bs)])
        except ValueError:
            raise KeyError(f"BS {bs} is not scheduled by this vector") from None

    def as_dict(self) -> dict[int, float]:
        return {i: float(v) for i, v in zip(self.bs_indices, self.mu)}


def effective_bandwidth_ratio(cfg: SystemConfig) -> float:
    return cfg.zeta


def access_rate(sinr, cfg: SystemConfig):
    """Full-bandwidth access rate ``xi_a B_a log2(1 + gamma)``."""
    return cfg.xi_a * cfg.access_bandwidth_hz * np.log2(1.0 + np.asarray(sinr, dtype=float))


def access_sum_rates(real: UeRealization, cfg: SystemConfig) -> np.ndarray:
    """Access sum rate of every attocell (mean per-UE rate; 0 when empty)."""
    return real.cell_mean(access_rate(real.sinr, cfg))


def access_sum_rate(bs: int, real: UeRealization, cfg: SystemConfig) -> float:
    return float(access_sum_rates(real, cfg)[real.local_index(bs)])


def backhaul_rate(k_b, cfg: SystemConfig):
    """Rate of a backhaul link at power ratio ``k_b``."""
    k = np.asarray(k_b, dtype=float)
    if np.any(k < 0):
        raise ValueError("k_b must be non-negative")
    out = cfg.xi_b * cfg.backhaul_bandwidth_hz * np.log2(1.0 + k * cfg.gamma_b)
    return float(out) if np.ndim(k_b) == 0 else out


def normalize_outer_tiers(topology: SuperCellTopology, schedule: ScheduleVector) -> dict[tuple[int, int], float]:
    """Per-hop shares ``mu_{i,j} = mu_i / sum_{i' in L_j} mu_{i'}`` along every path."""
    mu = schedule.as_dict()
    out: dict[tuple[int, int], float] = {}
    for i in schedule.bs_indices:
        for j in topology.path_to(i):
            total = sum(mu[q] for q in topology.descendants[j])
            out[(i, j)] = mu[i] / total if total > 0.0 else 0.0
    return out


def _check_same_branch(schedule: ScheduleVector, real: UeRealization) -> None:
    if schedule.bs_indices != real.bs_indices:
        raise ValueError("schedule and realization cover different BS sets")


def ubs_ue_rates(schedule: ScheduleVector, real: UeRealization, k_b: float, cfg: SystemConfig) -> np.ndarray:
    """End-to-end UBS rate of every UE, in realization order."""
    _check_same_branch(schedule, real)
    cell = real.cell_of_ue
    m_i = real.counts[cell].astype(float)
    se_b = cfg.zeta * math.log2(1.0 + k_b * cfg.gamma_b)
    lim = np.minimum(schedule.mu[cell] * se_b, real.spectral_efficiency())
    return cfg.xi_a * cfg.access_bandwidth_hz * lim / m_i


def ubs_ue_rate(u: int, bs: int, schedule: ScheduleVector, real: UeRealization, k_b: float,
                cfg: SystemConfig, topology: SuperCellTopology | None = None) -> float:
    """UBS rate of the ``u``-th UE (0-based within the cell) of ``bs``."""
    c = real.local_index(bs)
    if not 0 <= u < real.counts[c]:
        raise IndexError(f"BS {bs} has {real.counts[c]} UEs, no UE {u}")
    return float(ubs_ue_rates(schedule, real, k_b, cfg)[real.offsets[c] + u])


def cbs_bs_rates(schedule: ScheduleVector, real: UeRealization, k_b: float, cfg: SystemConfig) -> np.ndarray:
    _check_same_branch(schedule, real)
    return np.minimum(schedule.mu * backhaul_rate(k_b, cfg), access_sum_rates(real, cfg))


def cbs_bs_rate(bs: int, schedule: ScheduleVector, real: UeRealization, k_b: float,
                cfg: SystemConfig, topology: SuperCellTopology | None = None) -> float:
    return float(cbs_bs_rates(schedule, real, k_b, cfg)[real.local_index(bs)])


def cbs_ue_rates(schedule: ScheduleVector, real: UeRealization, k_b: float, cfg: SystemConfig) -> np.ndarray:
    """Per-UE split of the CBS cell rate.

    Backhaul-limited cells (``mu_i R_b <= R_a_i``) share ``mu_i R_b`` equally;
    otherwise each UE gets its own access rate over ``M_i``.
    """
    _check_same_branch(schedule, real)
    cell = real.cell_of_ue
    m_i = real.counts[cell].astype(float)
    r_b = backhaul_rate(k_b, cfg)
    backhaul_limited = schedule.mu * r_b <= access_sum_rates(real, cfg)
    shared = schedule.mu[cell] * r_b / m_i
    own = access_rate(real.sinr, cfg) / m_i
    return np.where(backhaul_limited[cell], shared, own)


def branch_sum_rate(policy: Policy | str, schedule: ScheduleVector, real: UeRealization, k_b: float,
                    cfg: SystemConfig, topology: SuperCellTopology | None = None) -> float:
    """End-to-end sum rate of the branch; 0 for an empty branch."""
    policy = Policy.parse(policy)
    if real.n_ues == 0:
        return 0.0
    if policy is Policy.UBS:
        return float(ubs_ue_rates(schedule, real, k_b, cfg).sum())
    return float(cbs_bs_rates(schedule, real, k_b, cfg).sum())


# -- general per-hop forms (cross-checks) ----------------------------------

def _path_limit(i: int, mu_ij: Mapping[tuple[int, int], float], k_links: Mapping[int, float],
                topology: SuperCellTopology, cfg: SystemConfig) -> float:
    """``min_j mu_{i,j} xi_b B_b log2(1 + K_j gamma_b)`` over the path of ``i``."""
    return min(
        mu_ij[(i, j)] * cfg.xi_b * cfg.backhaul_bandwidth_hz * math.log2(1.0 + k_links[j] * cfg.gamma_b)
        for j in topology.path_to(i)
    )


def ubs_ue_rates_general(schedule: ScheduleVector, real: UeRealization, k_links: Mapping[int, float],
                         cfg: SystemConfig, topology: SuperCellTopology) -> np.ndarray:
    mu_ij = normalize_outer_tiers(topology, schedule)
    out = np.empty(real.n_ues)
    off = real.offsets
    for c, i in enumerate(real.bs_indices):
        m = int(real.counts[c])
        if m == 0:
            continue
        hop = _path_limit(i, mu_ij, k_links, topology, cfg) / m
        acc = access_rate(real.sinr[off[c]:off[c + 1]], cfg) / m
        out[off[c]:off[c + 1]] = np.minimum(hop, acc)
    return out


def cbs_bs_rates_general(schedule: ScheduleVector, real: UeRealization, k_links: Mapping[int, float],
                         cfg: SystemConfig, topology: SuperCellTopology) -> np.ndarray:
    mu_ij = normalize_outer_tiers(topology, schedule)
    acc = access_sum_rates(real, cfg)
    return np.array([
        min(_path_limit(i, mu_ij, k_links, topology, cfg), acc[c]) for c, i in enumerate(real.bs_indices)
    ])
