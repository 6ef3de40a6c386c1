"""Backhaul bottleneck occurrence (BBO): CLT approximation and Monte Carlo.

A bottleneck occurs when the access sum rate of a branch,
``Y = sum_i (1/M_i) sum_{u in U_i} R_a(gamma_u)``, exceeds the rate of its
tier-1 backhaul link. The approximation replaces ``Y`` by ``(n/M) S`` where
``S`` is the plain sum over all UEs and ``n`` the number of occupied cells,
then treats ``S`` given ``n`` as Gaussian.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Protocol

import numpy as np
from scipy import special

from .channel import sinr_at_offset, sample_ue_offsets
from .config import SystemConfig
from .rates import access_rate, backhaul_rate
from .topology import SuperCellTopology

MC_BLOCK = 10_000


class _RateMoments(Protocol):
    mean_rate: float
    rate_std: float


@dataclass(frozen=True)
class BboEstimate:
    analytic: float
    monte_carlo: float
    std_error: float
    trials: int
    n_tiers: int
    m_ues: int
    k_b: float
    bandwidth_ratio: float

    def __post_init__(self):
        for name in ("analytic", "monte_carlo"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} probability {v!r} outside [0, 1]")

    @property
    def gap(self) -> float:
        return abs(self.analytic - self.monte_carlo)


def occupancy_pmf(n_bs: int, m_ues: int) -> np.ndarray:
    """``P[exactly n cells occupied]`` for ``n = 1..n_bs`` when ``m_ues`` balls land uniformly.

    The alternating inclusion-exclusion sum is evaluated in exact integer
    arithmetic and rounded once, so there is no cancellation error.
    """
    if n_bs < 1 or m_ues < 1:
        raise ValueError("n_bs and m_ues must be >= 1")
    denom = n_bs**m_ues
    out = np.zeros(n_bs)
    for n in range(1, min(n_bs, m_ues) + 1):
        s = sum((-1) ** l * math.comb(n, l) * (n - l) ** m_ues for l in range(n + 1))
        out[n - 1] = float(Fraction(math.comb(n_bs, n) * s, denom))
    return out


def q_function(x):
    """Standard Gaussian upper tail ``P[N(0,1) > x]``."""
    return 0.5 * special.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def _n_bs(topology: SuperCellTopology | int) -> int:
    return int(topology if isinstance(topology, int) else topology.n_bs_per_branch)


def bbo_analytic(cfg: SystemConfig, topology: SuperCellTopology | int, dist: _RateMoments, k_b, m_ues: int):
    """Gaussian approximation of the bottleneck probability; vectorised over ``k_b``."""
    if m_ues < 1:
        raise ValueError("m_ues must be >= 1")
    n_bs = _n_bs(topology)
    pmf = occupancy_pmf(n_bs, m_ues)
    n = np.arange(1, n_bs + 1, dtype=float)
    r_b = np.atleast_1d(backhaul_rate(np.asarray(k_b, dtype=float), cfg))
    mean, std = dist.mean_rate, dist.rate_std
    if std > 0:
        z = (r_b[:, None] - n * mean) / (n / math.sqrt(m_ues) * std)
        tail = q_function(z)
    else:
        tail = (n * mean > r_b[:, None]).astype(float)
    p = np.clip(tail @ pmf, 0.0, 1.0)
    return float(p[0]) if np.ndim(k_b) == 0 else p


def mmse_beta(per_cell_counts) -> float:
    """MMSE weight ``n_occupied / M`` mapping the plain UE sum onto the cell-averaged sum."""
    counts = np.asarray(per_cell_counts)
    total = int(counts.sum())
    if total < 1:
        raise ValueError("need at least one UE")
    return int(np.count_nonzero(counts)) / total


def cell_averaged_sum(counts, x) -> float:
    """``sum_i (1/M_i) sum_{u in U_i} x_u`` with UEs grouped by cell in order."""
    counts = np.asarray(counts, dtype=np.int64)
    x = np.asarray(x, dtype=float)
    cell = np.repeat(np.arange(counts.size), counts)
    return float(np.sum(x / counts[cell]))


def _access_sum_block(cfg: SystemConfig, n_bs: int, m_ues: int, n: int, seed: int,
                      key: tuple[int, ...]) -> np.ndarray:
    """Cell-averaged access sum rate for ``n`` independent trials."""
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))
    counts = rng.multinomial(m_ues, np.full(n_bs, 1.0 / n_bs), size=n)
    r, theta = sample_ue_offsets(n * m_ues, cfg, rng)
    rates = access_rate(sinr_at_offset(r * np.cos(theta), r * np.sin(theta), cfg), cfg).reshape(n, m_ues)
    # UEs are exchangeable, so the first counts[t, 0] go to cell 0 and so on
    edges = np.cumsum(counts, axis=1)
    cell = (np.arange(m_ues)[None, :, None] >= edges[:, None, :]).sum(axis=2)
    weight = 1.0 / np.take_along_axis(counts, cell, axis=1)
    return np.sum(rates * weight, axis=1)


def access_sum_samples(cfg: SystemConfig, topology: SuperCellTopology | int, m_ues: int, trials: int,
                       seed: int, workers: int = 1, key: tuple[int, ...] = ()) -> np.ndarray:
    """``trials`` draws of the branch access sum rate (bits/s).

    Trials are generated in fixed blocks; block ``b`` draws from the seed
    substream ``key + (b,)``, so the output does not depend on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if m_ues < 0:
        raise ValueError("m_ues must be >= 0")
    if m_ues == 0:
        return np.zeros(trials)
    n_bs = _n_bs(topology)
    sizes = [min(MC_BLOCK, trials - s) for s in range(0, trials, MC_BLOCK)]
    args = [(cfg, n_bs, m_ues, n, seed, tuple(key) + (b,)) for b, n in enumerate(sizes)]
    if workers > 1 and len(args) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_access_sum_block, *zip(*args)))
    else:
        parts = [_access_sum_block(*a) for a in args]
    return np.concatenate(parts)


def bbo_from_samples(samples: np.ndarray, k_b, cfg: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Exceedance fraction and its standard error for each ``k_b``."""
    r_b = np.atleast_1d(backhaul_rate(np.asarray(k_b, dtype=float), cfg))
    p = (samples[None, :] > r_b[:, None]).mean(axis=1)
    se = np.sqrt(p * (1.0 - p) / samples.size)
    return p, se


def bbo_monte_carlo(cfg: SystemConfig, topology: SuperCellTopology | int, k_b: float, m_ues: int,
                    trials: int, seed: int, workers: int = 1) -> tuple[float, float]:
    """Empirical bottleneck probability and its standard error."""
    samples = access_sum_samples(cfg, topology, m_ues, trials, seed, workers)
    p, se = bbo_from_samples(samples, k_b, cfg)
    return float(p[0]), float(se[0])


def estimate(cfg: SystemConfig, topology: SuperCellTopology, dist: _RateMoments, k_b: float, m_ues: int,
             trials: int, seed: int, workers: int = 1) -> BboEstimate:
    p_mc, se = bbo_monte_carlo(cfg, topology, k_b, m_ues, trials, seed, workers)
    return BboEstimate(
        analytic=bbo_analytic(cfg, topology, dist, k_b, m_ues),
        monte_carlo=p_mc,
        std_error=se,
        trials=trials,
        n_tiers=topology.n_tiers,
        m_ues=m_ues,
        k_b=float(k_b),
        bandwidth_ratio=cfg.bandwidth_ratio,
    )
