"""Experiment runners: sweep a grid, average over realizations, emit rows.

All sum-rate experiments share one structure. The grid is split into
*populations* ``(n_tiers, ue_density)``, which fix how UEs are drawn, and
*settings* ``(bw_ratio, k_b or scheme)``, which are evaluated on the same
draws (common random numbers). Realization ``r`` of a population with
``M`` UEs is drawn from the seed substream ``(n_tiers, M, r)``, so a given
realization is identical across experiments, policies and worker counts.
"""
from __future__ import annotations

import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .. import __version__
from ..bbo import access_sum_samples, bbo_analytic, bbo_from_samples
from ..channel import SinrDistribution
from ..config import ConfigError, SystemConfig
from ..power import Scheme, power_control
from ..rates import Policy, access_sum_rates, backhaul_rate, branch_sum_rate
from ..scheduler import SolverSettings, equal_schedule, optimize
from ..topology import build_super_cell, n_bs_per_branch
from .sampling import sample_realization

EXPERIMENTS = (
    "sumrate-vs-kb",
    "sumrate-vs-lambda",
    "sumrate-vs-nt",
    "sumrate-vs-bw",
    "pc-coefficients",
    "bbo-vs-kb",
    "bbo-grid",
)
POLICY_SERIES = ("UBS-OPT", "UBS-EQL", "CBS-OPT", "CBS-EQL")
ACCESS_LIMIT = "ACCESS-LIMIT"
BACKHAUL_LIMIT = "BACKHAUL-LIMIT"
CSV_SCHEMA = 1
REALIZATION_CHUNK = 64
MBPS = 1e6

_KB_SWEEP = tuple(float(v) for v in np.logspace(-4, 0, 13))

_DEFAULTS: dict[str, dict] = {
    "sumrate-vs-kb": dict(n_tiers=(3, 5), ue_density=(1.0, 5.0), k_b=_KB_SWEEP, bw_ratio=(3.0,),
                          policies=POLICY_SERIES, schemes=(), realizations=10_000),
    "sumrate-vs-lambda": dict(n_tiers=(3, 5), ue_density=tuple(float(v) for v in range(1, 11)),
                              k_b=(1.0, 1e-2), bw_ratio=(3.0,), policies=POLICY_SERIES, schemes=(),
                              realizations=10_000),
    "sumrate-vs-nt": dict(n_tiers=(1, 2, 3, 4, 5), ue_density=(1.0,), k_b=(1e-2,), bw_ratio=(1.0, 3.0),
                          policies=POLICY_SERIES, schemes=(), realizations=10_000),
    "sumrate-vs-bw": dict(n_tiers=(3, 5), ue_density=(1.0,), k_b=(1e-2,),
                          bw_ratio=(1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0), policies=POLICY_SERIES, schemes=(),
                          realizations=10_000),
    "pc-coefficients": dict(n_tiers=(1, 2, 3, 4, 5), ue_density=(), k_b=(), bw_ratio=(1.0, 2.0, 3.0, 4.0),
                            policies=(), schemes=("MSPC", "ASPC", "ARPC"), realizations=0),
    "bbo-vs-kb": dict(n_tiers=(1, 3, 5), ue_density=(1.0, 5.0), k_b=tuple(float(v) for v in np.logspace(-4, 0, 20)),
                      bw_ratio=(3.0,), policies=(), schemes=(), realizations=100_000),
    "bbo-grid": dict(n_tiers=(1, 2, 3, 4, 5), ue_density=(1.0, 2.0, 3.0, 4.0, 5.0), k_b=(), bw_ratio=(3.0,),
                     policies=(), schemes=("NPC", "MSPC", "ASPC", "ARPC"), realizations=100_000),
}

INTERFERENCE_NOTE = (
    "interference profiles are reconstructed by a truncated hexagonal-lattice sum "
    "(rings={rings}); absolute SINR and rate levels depend on this reconstruction and any "
    "deviation from reference figures is attributed to it"
)


@dataclass(frozen=True)
class ExperimentSpec:
    kind: str
    n_tiers: tuple[int, ...]
    ue_density: tuple[float, ...]
    k_b: tuple[float, ...]
    bw_ratio: tuple[float, ...]
    policies: tuple[str, ...]
    schemes: tuple[str, ...]
    realizations: int
    seed: int = 0
    workers: int = 1
    solver: SolverSettings = field(default_factory=SolverSettings)

    def __post_init__(self):
        if self.kind not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.kind!r}; choose from {', '.join(EXPERIMENTS)}")
        if not self.n_tiers or any(int(n) != n or n < 1 for n in self.n_tiers):
            raise ConfigError("n_tiers grid must be non-empty positive integers")
        if not self.bw_ratio or any(not b > 0 for b in self.bw_ratio):
            raise ConfigError("bw_ratio grid must be non-empty and positive")
        if any(not lam >= 0 for lam in self.ue_density):
            raise ConfigError("ue_density must be non-negative")
        if any(not k >= 0 for k in self.k_b):
            raise ConfigError("k_b must be non-negative")
        for p in self.policies:
            if p not in POLICY_SERIES:
                raise ConfigError(f"unknown policy series {p!r}; choose from {', '.join(POLICY_SERIES)}")
        for s in self.schemes:
            Scheme.parse(s)
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.kind != "pc-coefficients":
            if self.realizations < 1:
                raise ConfigError("realizations must be >= 1")
            if not self.ue_density:
                raise ConfigError("ue_density grid must be non-empty")
        if self.kind.startswith("sumrate"):
            if not self.policies:
                raise ConfigError("at least one policy series is required")
            if not self.k_b and not self.schemes:
                raise ConfigError("sum-rate experiments need a k_b grid or power-control schemes")
        if self.kind == "bbo-vs-kb" and not self.k_b:
            raise ConfigError("bbo-vs-kb needs a k_b grid")
        if self.kind in ("bbo-grid", "pc-coefficients") and not self.schemes:
            raise ConfigError(f"{self.kind} needs at least one power-control scheme")

    @classmethod
    def create(cls, kind: str, **overrides) -> "ExperimentSpec":
        """Spec with the default grids of ``kind``; ``None`` overrides are ignored."""
        if kind not in _DEFAULTS:
            raise ConfigError(f"unknown experiment {kind!r}; choose from {', '.join(EXPERIMENTS)}")
        values = dict(_DEFAULTS[kind])
        given = {k: v for k, v in overrides.items() if v is not None}
        if kind.startswith("sumrate") and given.get("schemes") and "k_b" not in given:
            values["k_b"] = ()  # power ratio comes from each scheme
        values.update(given)
        for key in ("n_tiers", "ue_density", "k_b", "bw_ratio", "policies", "schemes"):
            values[key] = tuple(values[key])
        values["n_tiers"] = tuple(int(n) for n in values["n_tiers"])
        values["schemes"] = tuple(Scheme.parse(s).value for s in values["schemes"])
        values["policies"] = tuple(str(p).upper() for p in values["policies"])
        return cls(kind=kind, **values)


@dataclass(frozen=True)
class Row:
    n_tiers: int
    ue_density: float | None
    m_ues: int | None
    bw_ratio: float
    k_b: float | None
    series: str
    scheme: str
    metric: str
    mean: float
    std_error: float
    realizations: int
    note: str = ""


@dataclass
class ResultTable:
    spec: ExperimentSpec
    config: SystemConfig
    rows: list[Row]

    def metadata(self) -> list[str]:
        s = self.spec
        grid = " ".join([
            f"n_tiers={_join(s.n_tiers)}",
            f"ue_density={_join(s.ue_density)}",
            f"k_b={_join(s.k_b)}",
            f"bw_ratio={_join(s.bw_ratio)}",
            f"policies={_join(s.policies)}",
            f"schemes={_join(s.schemes)}",
        ])
        solver = s.solver
        return [
            f"lifi_supercell {__version__} csv_schema={CSV_SCHEMA}",
            f"experiment={s.kind} seed={s.seed} config_sha256={self.config.digest()} realizations={s.realizations}",
            f"grid {grid}",
            f"solver step_size={_fmt(solver.step_size)} max_iter={solver.max_iter} "
            f"stall_window={solver.stall_window} stall_tol={_fmt(solver.stall_tol)} projection={solver.projection}",
            "units rates in Mbit/s; branch 1 only; M = round(ue_density * N_BS)",
            "attribution " + INTERFERENCE_NOTE.format(rings=self.config.interference_rings),
        ]


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def _join(values: Iterable) -> str:
    return ",".join(_fmt(v) if not isinstance(v, str) else v for v in values)


def m_for_density(ue_density: float, n_tiers: int) -> int:
    """``round(lambda * N_BS)`` with halves rounded up."""
    return int(math.floor(ue_density * n_bs_per_branch(n_tiers) + 0.5))


# -- sum-rate experiments ------------------------------------------------------

def _series_rate(series: str, real, k_b: float, cfg: SystemConfig, solver: SolverSettings) -> tuple[float, bool]:
    if real.n_ues == 0:
        return 0.0, True
    policy_name, mode = series.split("-")
    policy = Policy(policy_name)
    if mode == "OPT":
        sol = optimize(policy, real, k_b, cfg, solver)
        sched, converged = sol.schedule, sol.converged
    else:
        sched, converged = equal_schedule(real.n_bs, real.bs_indices, real.branch), True
    return branch_sum_rate(policy, sched, real, k_b, cfg), converged


def _sumrate_chunk(cfg: SystemConfig, n_tiers: int, m_ues: int, seed: int, start: int, stop: int,
                   settings: tuple[tuple[float, float], ...], series: tuple[str, ...],
                   solver: SolverSettings) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rates of realizations ``start..stop-1`` for every (bw, k_b) setting and series."""
    topo = build_super_cell(n_tiers, cfg.cell_radius_m)
    cfgs = {bw: cfg.with_bandwidth_ratio(bw) for bw, _ in settings}
    n = stop - start
    rates = np.zeros((n, len(settings), len(series)))
    access = np.zeros(n)
    failed = np.zeros((len(settings), len(series)), dtype=np.int64)
    for r in range(n):
        ss = np.random.SeedSequence(seed, spawn_key=(n_tiers, m_ues, start + r))
        real = sample_realization(topo, cfg, m_ues, ss)
        access[r] = access_sum_rates(real, cfg).sum()
        cache: dict[tuple[float, float], tuple[list[float], list[bool]]] = {}
        for c, key in enumerate(settings):
            if key not in cache:
                vals, oks = [], []
                for name in series:
                    v, ok = _series_rate(name, real, key[1], cfgs[key[0]], solver)
                    vals.append(v)
                    oks.append(ok)
                cache[key] = (vals, oks)
            vals, oks = cache[key]
            rates[r, c] = vals
            failed[c] += ~np.array(oks)
    return rates, access, failed


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.shape[0]
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, se


def _population_rates(executor: Executor | None, cfg: SystemConfig, spec: ExperimentSpec, n_tiers: int,
                      m_ues: int, settings, series) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    bounds = [(s, min(s + REALIZATION_CHUNK, spec.realizations))
              for s in range(0, spec.realizations, REALIZATION_CHUNK)]
    args = [(cfg, n_tiers, m_ues, spec.seed, a, b, tuple(settings), tuple(series), spec.solver) for a, b in bounds]
    if executor is None:
        parts = [_sumrate_chunk(*a) for a in args]
    else:
        parts = list(executor.map(_sumrate_chunk, *zip(*args)))
    rates = np.concatenate([p[0] for p in parts])
    access = np.concatenate([p[1] for p in parts])
    failed = sum(p[2] for p in parts)
    return rates, access, failed


def _scheme_kb(scheme: str, cfg: SystemConfig, n_tiers: int, dist: SinrDistribution) -> float:
    return power_control(scheme, cfg, n_bs_per_branch(n_tiers), dist).k_capped


def _run_sumrate(spec: ExperimentSpec, cfg: SystemConfig, executor: Executor | None) -> list[Row]:
    dist = SinrDistribution(cfg) if spec.schemes else None
    rows: list[Row] = []
    for nt in spec.n_tiers:
        # (bw, k_b, scheme label) for every evaluated setting
        labelled: list[tuple[float, float, str]] = []
        for bw in spec.bw_ratio:
            if spec.schemes:
                cfg_bw = cfg.with_bandwidth_ratio(bw)
                labelled += [(bw, _scheme_kb(s, cfg_bw, nt, dist), s) for s in spec.schemes]
            else:
                labelled += [(bw, kb, "") for kb in spec.k_b]
        settings = [(bw, kb) for bw, kb, _ in labelled]
        for lam in spec.ue_density:
            m = m_for_density(lam, nt)
            rates, access, failed = _population_rates(executor, cfg, spec, nt, m, settings, spec.policies)
            acc_mean, acc_se = _mean_se(access / MBPS)
            for c, (bw, kb, scheme) in enumerate(labelled):
                base = dict(n_tiers=nt, ue_density=lam, m_ues=m, bw_ratio=bw, k_b=kb, scheme=scheme,
                            metric="sum_rate_mbps")
                for p, name in enumerate(spec.policies):
                    mean, se = _mean_se(rates[:, c, p] / MBPS)
                    note = f"nonconverged={int(failed[c, p])}" if failed[c, p] else ""
                    rows.append(Row(series=name, mean=mean, std_error=se, realizations=spec.realizations,
                                    note=note, **base))
                rows.append(Row(series=ACCESS_LIMIT, mean=acc_mean, std_error=acc_se,
                                realizations=spec.realizations, **base))
                r_b = backhaul_rate(kb, cfg.with_bandwidth_ratio(bw)) / MBPS
                rows.append(Row(series=BACKHAUL_LIMIT, mean=r_b, std_error=0.0, realizations=0,
                                note="deterministic", **base))
    return rows


# -- power control and BBO -------------------------------------------------------

def _run_pc(spec: ExperimentSpec, cfg: SystemConfig) -> list[Row]:
    dist = SinrDistribution(cfg)
    rows: list[Row] = []
    for nt in spec.n_tiers:
        for bw in spec.bw_ratio:
            cfg_bw = cfg.with_bandwidth_ratio(bw)
            for s in spec.schemes:
                res = power_control(s, cfg_bw, n_bs_per_branch(nt), dist)
                base = dict(n_tiers=nt, ue_density=None, m_ues=None, bw_ratio=bw, k_b=res.k_capped,
                            series="COEFFICIENT", scheme=res.scheme.value, std_error=0.0, realizations=0,
                            note="deterministic")
                rows.append(Row(metric="log_k_min", mean=res.log_k_min, **base))
                rows.append(Row(metric="k_min", mean=res.k_min, **base))
                rows.append(Row(metric="k_capped", mean=res.k_capped, **base))
                rows.append(Row(metric="backhaul_rate_mbps", mean=res.backhaul_rate / MBPS, **base))
    return rows


def _run_bbo(spec: ExperimentSpec, cfg: SystemConfig) -> list[Row]:
    dist = SinrDistribution(cfg)
    rows: list[Row] = []
    for nt in spec.n_tiers:
        n_bs = n_bs_per_branch(nt)
        for lam in spec.ue_density:
            m = m_for_density(lam, nt)
            samples = access_sum_samples(cfg, n_bs, m, spec.realizations, spec.seed, spec.workers,
                                         key=(nt, m)) if m else None
            for bw in spec.bw_ratio:
                cfg_bw = cfg.with_bandwidth_ratio(bw)
                if spec.kind == "bbo-grid":
                    points = [(_scheme_kb(s, cfg_bw, nt, dist), s) for s in spec.schemes]
                else:
                    points = [(kb, "") for kb in spec.k_b]
                kbs = np.array([kb for kb, _ in points])
                if m:
                    analytic = np.atleast_1d(bbo_analytic(cfg_bw, n_bs, dist, kbs, m))
                    p_mc, se_mc = bbo_from_samples(samples, kbs, cfg_bw)
                    note = ""
                else:
                    analytic = p_mc = se_mc = np.zeros(kbs.size)
                    note = "no UEs"
                for c, (kb, scheme) in enumerate(points):
                    base = dict(n_tiers=nt, ue_density=lam, m_ues=m, bw_ratio=bw, k_b=kb, scheme=scheme,
                                metric="bbo_probability", note=note)
                    rows.append(Row(series="ANALYTIC", mean=float(analytic[c]), std_error=0.0, realizations=0,
                                    **base))
                    rows.append(Row(series="MONTE-CARLO", mean=float(p_mc[c]), std_error=float(se_mc[c]),
                                    realizations=spec.realizations, **base))
    return rows


def run_experiment(spec: ExperimentSpec, cfg: SystemConfig) -> ResultTable:
    """Evaluate every grid point of ``spec``; rows come out in a fixed order."""
    if spec.kind == "pc-coefficients":
        rows = _run_pc(spec, cfg)
    elif spec.kind.startswith("bbo"):
        rows = _run_bbo(spec, cfg)
    elif spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = _run_sumrate(spec, cfg, pool)
    else:
        rows = _run_sumrate(spec, cfg, None)
    return ResultTable(spec, cfg, rows)
