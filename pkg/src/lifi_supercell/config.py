"""System parameters and derived link-budget constants."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Mapping

import yaml


class ConfigError(ValueError):
    """Invalid configuration value or file."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to reach its stated accuracy."""


def lambertian_order(semiangle_deg: float) -> float:
    """Lambertian order ``-ln 2 / ln cos(semiangle)``."""
    if not 0.0 < semiangle_deg < 90.0:
        raise ValueError(f"semi-angle must be in (0, 90) degrees, got {semiangle_deg!r}")
    return -math.log(2.0) / math.log(math.cos(math.radians(semiangle_deg)))


# Backhaul LED semi-angle (narrow point-to-point beam). With K_b = 1 and
# B_b = 3 B_a it lets a 5-tier branch at 5 UEs per cell bottleneck about 20%
# of the time while 4 tiers never do. A backhaul beam as wide as the access
# beam (40 deg) gives ~560 Mbit/s and would bottleneck even small branches.
DEFAULT_BACKHAUL_SEMIANGLE_DEG = 3.1


@dataclass(frozen=True)
class SystemConfig:
    led_optical_power_w: float = 10.0
    access_semiangle_deg: float = 40.0
    backhaul_semiangle_deg: float = DEFAULT_BACKHAUL_SEMIANGLE_DEG
    vertical_sep_m: float = 2.25
    cell_radius_m: float = 2.5
    access_bandwidth_hz: float = 20e6
    backhaul_bandwidth_hz: float = 60e6
    fft_access: int = 1024
    fft_backhaul: int | None = None
    noise_psd: float = 5e-22
    pd_area_m2: float = 1e-4
    pd_responsivity: float = 0.6
    dc_bias_factor: float = 3.0
    access_elec_power: float | None = None
    interference_rings: int = 10

    def __post_init__(self):
        positive = [
            "led_optical_power_w", "vertical_sep_m", "cell_radius_m", "access_bandwidth_hz",
            "backhaul_bandwidth_hz", "noise_psd", "pd_area_m2", "pd_responsivity", "dc_bias_factor",
        ]
        for name in positive:
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        for name in ("access_semiangle_deg", "backhaul_semiangle_deg"):
            v = getattr(self, name)
            if not 0.0 < v < 90.0:
                raise ConfigError(f"{name} must be in (0, 90), got {v!r}")
        if self.fft_access <= 2:
            raise ConfigError("fft_access must exceed 2")
        if self.fft_backhaul is not None and self.fft_backhaul <= 2:
            raise ConfigError("fft_backhaul must exceed 2")
        if self.access_elec_power is not None and not self.access_elec_power > 0:
            raise ConfigError("access_elec_power must be positive")
        if int(self.interference_rings) != self.interference_rings or self.interference_rings < 1:
            raise ConfigError("interference_rings must be a positive integer")

    # -- derived quantities -------------------------------------------------

    @property
    def n_fft_backhaul(self) -> int:
        """Backhaul FFT size; defaults to matching the access subchannel width."""
        if self.fft_backhaul is not None:
            return int(self.fft_backhaul)
        return int(round(self.fft_access * self.backhaul_bandwidth_hz / self.access_bandwidth_hz))

    @property
    def xi_a(self) -> float:
        return (self.fft_access - 2) / self.fft_access

    @property
    def xi_b(self) -> float:
        n = self.n_fft_backhaul
        return (n - 2) / n

    @property
    def m(self) -> float:
        return lambertian_order(self.access_semiangle_deg)

    @property
    def ell(self) -> float:
        return lambertian_order(self.backhaul_semiangle_deg)

    @property
    def equivalent_radius(self) -> float:
        """Radius of the disc with the same area as the hexagonal cell."""
        return self.cell_radius_m * math.sqrt(3.0 * math.sqrt(3.0) / (2.0 * math.pi))

    @property
    def p_a(self) -> float:
        # DC bias = alpha x signal RMS, so electrical power = (P_opt / alpha)^2
        if self.access_elec_power is not None:
            return float(self.access_elec_power)
        return (self.led_optical_power_w / self.dc_bias_factor) ** 2

    @property
    def omega(self) -> float:
        """Noise term of the downlink SINR denominator."""
        m, h = self.m, self.vertical_sep_m
        gain = (m + 1.0) * h ** (m + 1.0) * self.pd_area_m2 * self.pd_responsivity
        return 4.0 * math.pi**2 * self.noise_psd * self.access_bandwidth_hz * self.xi_a / (gain**2 * self.p_a)

    @property
    def gamma_b(self) -> float:
        """Per-subcarrier backhaul SNR at unit power ratio."""
        num = ((self.ell + 1.0) * self.pd_area_m2 * self.pd_responsivity) ** 2 * self.p_a
        den = 72.0 * math.pi**2 * self.cell_radius_m**4 * self.noise_psd * self.backhaul_bandwidth_hz * self.xi_b**2
        return num / den

    @property
    def zeta(self) -> float:
        """Effective backhaul-to-access bandwidth ratio."""
        return self.xi_b * self.backhaul_bandwidth_hz / (self.xi_a * self.access_bandwidth_hz)

    @property
    def bandwidth_ratio(self) -> float:
        return self.backhaul_bandwidth_hz / self.access_bandwidth_hz

    def with_bandwidth_ratio(self, ratio: float) -> "SystemConfig":
        """Copy with ``B_b = ratio * B_a`` and a subchannel-matched backhaul FFT."""
        if not ratio > 0:
            raise ConfigError(f"bandwidth ratio must be positive, got {ratio!r}")
        return replace(self, backhaul_bandwidth_hz=ratio * self.access_bandwidth_hz, fft_backhaul=None)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any]) -> "SystemConfig":
        types = {f.name: f.type for f in fields(cls)}
        unknown = set(data) - set(types)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        values = {k: _coerce(k, v, types[k]) for k, v in data.items()}
        try:
            return cls(**values)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _coerce(name: str, value: Any, annotation: str) -> Any:
    # YAML 1.1 reads "20e6" as a string; accept numeric text for numeric fields
    if value is None or isinstance(value, bool):
        return value
    try:
        if annotation.startswith("int"):
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        if annotation.startswith("float"):
            return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"config key {name!r} must be numeric, got {value!r}") from None
    return value


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> SystemConfig:
    """Read a flat YAML mapping of config keys; ``overrides`` win over the file."""
    data: dict[str, Any] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        try:
            loaded = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config {path} must be a flat key-value mapping")
        for k, v in loaded.items():
            if isinstance(v, (dict, list)):
                raise ConfigError(f"config key {k!r} must hold a scalar")
        data.update(loaded)
    if overrides:
        data.update({k: v for k, v in overrides.items() if v is not None})
    return SystemConfig.from_mapping(data)
