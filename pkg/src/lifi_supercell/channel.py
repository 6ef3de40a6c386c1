"""Downlink SINR model, its distribution and moments, and the backhaul SNR.

Interference comes from every other BS of the unbounded hexagonal lattice
(full frequency reuse), truncated to ``cfg.interference_rings`` rings around
the serving BS. In the global frame the six nearest interferers sit at
0, 60, ..., 300 degrees. The angular profiles ``I_0(r)`` / ``I_30(r)`` use an
azimuth measured from the hexagon-vertex direction, so azimuth 30 points at
the nearest interferer (the strongest interference).
"""
from __future__ import annotations

import math
import warnings
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .config import NumericalError, SystemConfig, lambertian_order
from .topology import SuperCellTopology

__all__ = [
    "lambertian_order",
    "lattice_offsets",
    "interference_at",
    "interference_profile",
    "sinr_at_offset",
    "downlink_sinr",
    "sample_ue_offsets",
    "sample_sinr",
    "backhaul_snr",
    "arcsin_clamped",
    "SinrDistribution",
    "sinr_cdf",
    "mean_sinr",
    "mean_rate",
    "rate_variance",
]

PROFILE_POINTS = 512
CDF_TOL = 1e-6
_CHUNK = 8192


@lru_cache(maxsize=32)
def lattice_offsets(rings: int, spacing: float) -> np.ndarray:
    """Interferer positions relative to the serving BS, ``(K, 2)`` array.

    Every lattice point within ``rings`` hexagonal rings, excluding the
    serving BS itself.
    """
    if rings < 1:
        raise ValueError("rings must be >= 1")
    pts = []
    for a in range(-rings, rings + 1):
        for b in range(-rings, rings + 1):
            if (a, b) != (0, 0) and max(abs(a), abs(b), abs(a + b)) <= rings:
                pts.append((a + 0.5 * b, b * math.sqrt(3.0) / 2.0))
    out = spacing * np.array(pts)
    out.setflags(write=False)
    return out


def interference_at(x, y, cfg: SystemConfig, rings: int | None = None) -> np.ndarray:
    """Sum of ``(d^2 + h^2)^(-m-3)`` over lattice interferers at offsets (x, y)."""
    rings = cfg.interference_rings if rings is None else rings
    lat = lattice_offsets(int(rings), math.sqrt(3.0) * cfg.cell_radius_m)
    x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    flat_x, flat_y = x.ravel(), y.ravel()
    h2 = cfg.vertical_sep_m**2
    p = -cfg.m - 3.0
    out = np.empty(flat_x.size)
    for s in range(0, flat_x.size, _CHUNK):
        dx = flat_x[s:s + _CHUNK, None] - lat[:, 0]
        dy = flat_y[s:s + _CHUNK, None] - lat[:, 1]
        out[s:s + _CHUNK] = np.power(dx * dx + dy * dy + h2, p).sum(axis=1)
    return out.reshape(x.shape)


def interference_profile(r, azimuth_deg: float, cfg: SystemConfig, rings: int | None = None):
    """Lattice interference at distance ``r`` along ``azimuth_deg`` (0 or 30)."""
    r_arr = np.asarray(r, dtype=float)
    if np.any(r_arr < 0) or np.any(r_arr > cfg.equivalent_radius * (1 + 1e-12)):
        raise ValueError("r must lie in [0, R_e]")
    if rings is not None and rings < 1:
        raise ValueError("rings must be >= 1")
    ang = math.radians(azimuth_deg + 30.0)
    val = interference_at(r_arr * math.cos(ang), r_arr * math.sin(ang), cfg, rings)
    return float(val) if np.ndim(r) == 0 else val


def _signal(r2, cfg: SystemConfig):
    return np.power(r2 + cfg.vertical_sep_m**2, -cfg.m - 3.0) / cfg.xi_a


def sinr_at_offset(x, y, cfg: SystemConfig, rings: int | None = None) -> np.ndarray:
    """Downlink SINR for UEs at horizontal offsets (x, y) from their serving BS."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return _signal(x * x + y * y, cfg) / (interference_at(x, y, cfg, rings) + cfg.omega)


def downlink_sinr(r: float, theta: float, serving_bs: int, topology: SuperCellTopology,
                  cfg: SystemConfig) -> float:
    """SINR of a UE at polar offset ``(r, theta)`` (global frame) from ``serving_bs``."""
    if serving_bs != 0 and serving_bs not in topology.tier:
        raise KeyError(f"unknown BS index {serving_bs}")
    if r < 0 or r > cfg.equivalent_radius * (1 + 1e-12):
        raise ValueError(f"UE at r={r} lies outside the serving disc of radius {cfg.equivalent_radius}")
    return float(sinr_at_offset(r * math.cos(theta), r * math.sin(theta), cfg)[()])


def sample_ue_offsets(n: int, cfg: SystemConfig, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Uniform polar positions over the equivalent disc: returns (r, theta)."""
    r = cfg.equivalent_radius * np.sqrt(rng.random(n))
    theta = 2.0 * math.pi * rng.random(n)
    return r, theta


def sample_sinr(n: int, cfg: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    r, theta = sample_ue_offsets(n, cfg, rng)
    return sinr_at_offset(r * np.cos(theta), r * np.sin(theta), cfg)


def backhaul_snr(k_b, cfg: SystemConfig):
    """Per-subcarrier backhaul SNR at power ratio ``k_b``."""
    if np.any(np.asarray(k_b) < 0):
        raise ValueError("k_b must be non-negative")
    return k_b * cfg.gamma_b


def arcsin_clamped(x: float) -> float:
    if x > 1.0:
        return math.pi / 2
    if x < -1.0:
        return -math.pi / 2
    return math.asin(x)


class SinrDistribution:
    """Distribution of the downlink SINR of a uniformly placed UE.

    Interference profiles are tabulated once on a uniform radial grid over
    ``[0, R_e]`` and linearly interpolated; everything after construction is
    read-only. Moments are computed lazily and memoised.
    """

    def __init__(self, cfg: SystemConfig, grid_points: int = PROFILE_POINTS):
        self.cfg = cfg
        self.r_e = cfg.equivalent_radius
        self._r = np.linspace(0.0, self.r_e, grid_points)
        self._dr = self._r[1] - self._r[0]
        self.i0 = interference_profile(self._r, 0.0, cfg)
        self.i30 = interference_profile(self._r, 30.0, cfg)
        if not (np.all(np.isfinite(self.i0)) and np.all(np.isfinite(self.i30))
                and np.all(self.i0 >= 0) and np.all(self.i30 >= 0)):
            raise NumericalError("interference profiles are not finite and non-negative")
        h = cfg.vertical_sep_m
        self.gamma_min = float(_signal(self.r_e**2, cfg) / (self.i30[-1] + cfg.omega))
        self.gamma_max = float(h ** (-2.0 * cfg.m - 6.0) / cfg.xi_a / (self.i0[0] + cfg.omega))
        self._sum = (self.i0 + self.i30).tolist()
        self._diff = np.abs(self.i0 - self.i30).tolist()
        self._sig2 = (2.0 * _signal(self._r**2, cfg)).tolist()
        self._sum_arr = self.i0 + self.i30
        self._diff_arr = np.abs(self.i0 - self.i30)
        self._sig2_arr = 2.0 * _signal(self._r**2, cfg)

    def _interp(self, table: list, r: float) -> float:
        t = r / self._dr
        k = min(int(t), len(table) - 2)
        w = t - k
        return table[k] * (1.0 - w) + table[k + 1] * w

    def z(self, r: float, gamma: float) -> float:
        """Normalised angular threshold: SINR at (r, theta) <= gamma iff cos(6 theta') >= z."""
        num = self._interp(self._sig2, r) / gamma - 2.0 * self.cfg.omega - self._interp(self._sum, r)
        den = self._interp(self._diff, r)
        if den <= 0.0:
            return math.copysign(math.inf, num) if num != 0.0 else 0.0
        return num / den

    def _kinks(self, gamma: float) -> list[float] | None:
        """Approximate radii where z crosses +-1 (kinks of the clamped arcsine)."""
        num = self._sig2_arr / gamma - 2.0 * self.cfg.omega - self._sum_arr
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self._diff_arr > 0, num / self._diff_arr, np.sign(num) * np.inf)
        pts = []
        for level in (1.0, -1.0):
            s = np.sign(z - level)
            idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
            for k in idx:
                if np.isfinite(z[k]) and np.isfinite(z[k + 1]):
                    w = (level - z[k]) / (z[k + 1] - z[k])
                    pts.append(float(self._r[k] + w * self._dr))
                else:
                    pts.append(float(self._r[k + 1]))
        pts = sorted(p for p in pts if 0.0 < p < self.r_e)
        return pts or None

    def cdf(self, gamma: float) -> float:
        """P[SINR <= gamma]; values outside the support clamp to 0 or 1."""
        if gamma <= self.gamma_min:
            return 0.0
        if gamma >= self.gamma_max:
            return 1.0
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(lambda r: arcsin_clamped(self.z(r, gamma)) * r,
                                      0.0, self.r_e, epsabs=1e-9, epsrel=1e-9, limit=200,
                                      points=self._kinks(gamma))
        scale = 2.0 / (math.pi * self.r_e**2)
        if scale * err > CDF_TOL:
            raise NumericalError(f"CDF quadrature at gamma={gamma:g} reached only {scale * err:.3e}")
        p = 0.5 - scale * val
        return min(1.0, max(0.0, p))

    def cdf_many(self, gammas) -> np.ndarray:
        return np.array([self.cdf(float(g)) for g in np.ravel(gammas)]).reshape(np.shape(gammas))

    def expectation(self, g: Callable[[float], float], dg: Callable[[float], float]) -> float:
        """E[g(SINR)] for increasing ``g`` via ``g(min) + int g'(x) P[SINR > x] dx``.

        Integrated over ``log x`` since the support spans several decades.
        """
        lo, hi = math.log(self.gamma_min), math.log(self.gamma_max)

        def integrand(t: float) -> float:
            x = math.exp(t)
            return dg(x) * x * (1.0 - self.cdf(x))

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, err = integrate.quad(integrand, lo, hi, epsabs=0.0, epsrel=1e-6, limit=200)
        total = g(self.gamma_min) + val
        if err > 1e-4 * abs(total):
            raise NumericalError(f"moment quadrature reached only {err:.3e} absolute accuracy")
        return total

    @cached_property
    def mean_sinr(self) -> float:
        return self.expectation(lambda x: x, lambda x: 1.0)

    @property
    def rate_scale(self) -> float:
        return self.cfg.xi_a * self.cfg.access_bandwidth_hz

    @property
    def rate_bounds(self) -> tuple[float, float]:
        """(R_min, R_max): per-UE access rate at the SINR extremes."""
        s = self.rate_scale
        return s * math.log2(1 + self.gamma_min), s * math.log2(1 + self.gamma_max)

    @cached_property
    def mean_rate(self) -> float:
        s = self.rate_scale
        return self.expectation(lambda x: s * math.log2(1 + x),
                                lambda x: s / (math.log(2.0) * (1 + x)))

    @cached_property
    def rate_second_moment(self) -> float:
        c = self.rate_scale / math.log(2.0)
        return self.expectation(lambda x: (c * math.log1p(x)) ** 2,
                                lambda x: 2 * c * c * math.log1p(x) / (1 + x))

    @cached_property
    def rate_variance(self) -> float:
        var = self.rate_second_moment - self.mean_rate**2
        if var < -1e-6 * self.rate_second_moment:
            raise NumericalError(f"negative rate variance {var:.3e}")
        return max(var, 0.0)

    @property
    def rate_std(self) -> float:
        return math.sqrt(self.rate_variance)


def sinr_cdf(gamma: float, dist: SinrDistribution) -> float:
    return dist.cdf(gamma)


def mean_sinr(dist: SinrDistribution) -> float:
    return dist.mean_sinr


def mean_rate(dist: SinrDistribution, cfg: SystemConfig | None = None) -> float:
    _check_cfg(dist, cfg)
    return dist.mean_rate


def rate_variance(dist: SinrDistribution, cfg: SystemConfig | None = None) -> float:
    _check_cfg(dist, cfg)
    return dist.rate_variance


def _check_cfg(dist: SinrDistribution, cfg: SystemConfig | None) -> None:
    if cfg is not None and cfg != dist.cfg:
        raise ValueError("config does not match the one the distribution was built from")
