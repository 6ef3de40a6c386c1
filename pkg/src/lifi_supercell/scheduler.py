"""Bandwidth scheduling on the bottleneck link by projected subgradient ascent.

Objectives are in normalized units: the branch sum rate divided by the
bottleneck-link rate ``R_b``. With ``rho_u`` the per-UE normalized rate,

    UBS:  sum_i (1/M_i) sum_{u in U_i} min(mu_i, rho_u)
    CBS:  sum_i min(mu_i, c_i),   c_i = mean of rho_u over cell i

Empty cells contribute nothing to either objective.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .config import SystemConfig
from .rates import Policy, ScheduleVector, UeRealization

_UBS, _CBS = 0, 1


@dataclass(frozen=True)
class SolverSettings:
    step_size: float = 1e-3
    max_iter: int = 20_000
    stall_window: int = 500
    stall_tol: float = 1e-8
    init: str = "equal"
    projection: str = "clip"  # "clip" (clip then renormalize) or "simplex" (Euclidean)

    def __post_init__(self):
        if not (self.step_size > 0 and math.isfinite(self.step_size)):
            raise ValueError("step_size must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.stall_window < 1:
            raise ValueError("stall_window must be >= 1")
        if self.stall_tol < 0:
            raise ValueError("stall_tol must be non-negative")
        if self.init not in ("equal",):
            raise ValueError(f"unknown init mode {self.init!r}")
        if self.projection not in ("clip", "simplex"):
            raise ValueError(f"unknown projection {self.projection!r}")


@dataclass(frozen=True)
class ScheduleSolution:
    schedule: ScheduleVector
    objective: float
    iterations: int
    converged: bool
    trace: np.ndarray = field(repr=False)


def equal_schedule(n_bs: int, bs_indices: tuple[int, ...] | None = None, branch: int = 1) -> ScheduleVector:
    if n_bs < 1:
        raise ValueError("n_bs must be >= 1")
    idx = tuple(range(1, n_bs + 1)) if bs_indices is None else tuple(bs_indices)
    if len(idx) != n_bs:
        raise ValueError("bs_indices length must equal n_bs")
    return ScheduleVector(branch, idx, np.full(n_bs, 1.0 / n_bs))


def hyperplane_project(vector) -> np.ndarray:
    """Project onto the zero-sum hyperplane: ``(I - J/N) v``."""
    v = np.asarray(vector, dtype=float)
    return v - v.mean()


def project_simplex(vector) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    return _simplex_nb(np.asarray(vector, dtype=float).copy())


def clip_renormalize(vector) -> np.ndarray:
    v = np.clip(np.asarray(vector, dtype=float), 0.0, None)
    s = v.sum()
    if s <= 0:
        return np.full(v.size, 1.0 / v.size)
    return v / s


# -- objectives and subgradients (numpy reference versions) -----------------

def _cell_index(counts: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(counts.size), counts)


def cell_caps(counts, rho) -> np.ndarray:
    """Mean ``rho`` per cell, 0 for empty cells."""
    counts = np.asarray(counts, dtype=np.int64)
    sums = np.bincount(_cell_index(counts), weights=np.asarray(rho, dtype=float), minlength=counts.size)
    return np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)


def ubs_objective(mu, counts, rho) -> float:
    counts = np.asarray(counts, dtype=np.int64)
    cell = _cell_index(counts)
    mu = np.asarray(mu, dtype=float)
    terms = np.minimum(mu[cell], rho) / counts[cell]
    return float(terms.sum())


def cbs_objective(mu, counts, rho) -> float:
    caps = cell_caps(counts, rho)
    return float(np.minimum(np.asarray(mu, dtype=float), caps)[np.asarray(counts) > 0].sum())


def objective(policy: Policy | str, mu, counts, rho) -> float:
    if Policy.parse(policy) is Policy.UBS:
        return ubs_objective(mu, counts, rho)
    return cbs_objective(mu, counts, rho)


def _as_mu(schedule) -> np.ndarray:
    return np.asarray(schedule.mu if isinstance(schedule, ScheduleVector) else schedule, dtype=float)


def ubs_subgradient(schedule, counts, rho) -> np.ndarray:
    """``g_i`` = fraction of cell-i UEs with ``mu_i <= rho_u``; 0 for empty cells."""
    mu = _as_mu(schedule)
    counts = np.asarray(counts, dtype=np.int64)
    cell = _cell_index(counts)
    hits = np.bincount(cell, weights=(mu[cell] <= rho).astype(float), minlength=counts.size)
    return np.where(counts > 0, hits / np.maximum(counts, 1), 0.0)


def cbs_subgradient(schedule, counts, rho) -> np.ndarray:
    """``g_i = 1`` for occupied cells with ``mu_i <= mean rho``, else 0."""
    mu = _as_mu(schedule)
    counts = np.asarray(counts)
    return ((counts > 0) & (mu <= cell_caps(counts, rho))).astype(float)


# -- jitted core -------------------------------------------------------------

@numba.njit(cache=True)
def _simplex_nb(v):
    n = v.size
    u = np.sort(v)[::-1]
    css = 0.0
    theta = 0.0
    for k in range(n):
        css += u[k]
        t = (css - 1.0) / (k + 1)
        if u[k] - t > 0:
            theta = t
    out = np.empty(n)
    for k in range(n):
        out[k] = max(v[k] - theta, 0.0)
    return out


@numba.njit(cache=True)
def _objective_nb(policy, mu, counts, offsets, rho, caps):
    total = 0.0
    for c in range(counts.size):
        m = counts[c]
        if m == 0:
            continue
        if policy == 0:
            acc = 0.0
            for u in range(offsets[c], offsets[c + 1]):
                acc += min(mu[c], rho[u])
            total += acc / m
        else:
            total += min(mu[c], caps[c])
    return total


@numba.njit(cache=True)
def _subgradient_nb(policy, mu, counts, offsets, rho, caps, g):
    for c in range(counts.size):
        m = counts[c]
        if m == 0:
            g[c] = 0.0
        elif policy == 0:
            hits = 0
            for u in range(offsets[c], offsets[c + 1]):
                if mu[c] <= rho[u]:
                    hits += 1
            g[c] = hits / m
        else:
            g[c] = 1.0 if mu[c] <= caps[c] else 0.0


@numba.njit(cache=True)
def _ascend_nb(policy, counts, offsets, rho, caps, mu0, alpha, max_iter, window, tol, simplex):
    n = counts.size
    mu = mu0.copy()
    g = np.empty(n)
    trace = np.empty(max_iter + 1)
    best_mu = mu.copy()
    best = _objective_nb(policy, mu, counts, offsets, rho, caps)
    trace[0] = best
    it = 0
    converged = False
    while it < max_iter:
        _subgradient_nb(policy, mu, counts, offsets, rho, caps, g)
        gm = g.mean()
        moved = False
        for c in range(n):
            step = alpha * (g[c] - gm)
            if step != 0.0:
                moved = True
            mu[c] += step
        if not moved:
            converged = True  # zero projected subgradient: stationary
            break
        if simplex:
            mu = _simplex_nb(mu)
        else:
            s = 0.0
            for c in range(n):
                if mu[c] < 0.0:
                    mu[c] = 0.0
                s += mu[c]
            for c in range(n):
                mu[c] /= s
        it += 1
        val = _objective_nb(policy, mu, counts, offsets, rho, caps)
        if val > best:
            best = val
            best_mu[:] = mu
        trace[it] = best
        if it >= window and trace[it] - trace[it - window] <= tol * abs(trace[it]):
            converged = True
            break
    return best_mu, best, it, converged, trace[: it + 1]


def optimize_normalized(policy: Policy | str, counts, rho, settings: SolverSettings | None = None,
                        mu0=None) -> tuple[np.ndarray, float, int, bool, np.ndarray]:
    """Maximize the normalized objective; returns ``(mu, objective, iterations, converged, trace)``."""
    settings = settings or SolverSettings()
    policy = Policy.parse(policy)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    rho = np.ascontiguousarray(rho, dtype=float)
    n = counts.size
    if n < 1:
        raise ValueError("need at least one BS")
    if rho.size != counts.sum():
        raise ValueError("rho must hold one value per UE")
    if np.any(rho <= 0) or np.any(np.isnan(rho)):
        raise ValueError("rho must be positive")
    mu = np.full(n, 1.0 / n) if mu0 is None else np.array(mu0, dtype=float)
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    caps = cell_caps(counts, rho)
    code = _UBS if policy is Policy.UBS else _CBS
    if n == 1:
        val = float(_objective_nb(code, mu, counts, offsets, rho, caps))
        return mu, val, 0, True, np.array([val])
    best_mu, best, it, conv, trace = _ascend_nb(
        code, counts, offsets, rho, caps, mu, settings.step_size, settings.max_iter,
        settings.stall_window, settings.stall_tol, settings.projection == "simplex",
    )
    return best_mu, float(best), int(it), bool(conv), trace


def optimize(policy: Policy | str, real: UeRealization, k_b: float, cfg: SystemConfig,
             settings: SolverSettings | None = None) -> ScheduleSolution:
    """Optimal schedule of one realization at backhaul power ratio ``k_b``."""
    if real.n_ues == 0:
        raise ValueError("cannot schedule an empty branch")
    rho = real.normalized_rates(k_b, cfg)
    if not np.all(np.isfinite(rho)):
        # no backhaul capacity: every schedule yields zero rate
        sched = equal_schedule(real.n_bs, real.bs_indices, real.branch)
        return ScheduleSolution(sched, 0.0, 0, True, np.zeros(1))
    mu, val, it, conv, trace = optimize_normalized(policy, real.counts, rho, settings)
    sched = ScheduleVector(real.branch, real.bs_indices, mu / mu.sum())
    return ScheduleSolution(sched, val, it, conv, trace)


def grid_oracle(policy: Policy | str, counts, rho, resolution: float = 1e-3) -> tuple[float, np.ndarray]:
    """Exhaustive search over the simplex grid with spacing ``resolution`` (N_BS <= 3)."""
    policy = Policy.parse(policy)
    counts = np.asarray(counts, dtype=np.int64)
    rho = np.asarray(rho, dtype=float)
    n = counts.size
    if n > 3:
        raise ValueError("grid oracle supports at most 3 BSs")
    steps = int(round(1.0 / resolution))
    if steps < 1:
        raise ValueError("resolution must be <= 1")
    grid = np.arange(steps + 1) / steps
    # per-cell value of the objective as a function of its own share
    tables = np.zeros((n, steps + 1))
    off = np.concatenate([[0], np.cumsum(counts)])
    for c in range(n):
        r = rho[off[c]:off[c + 1]]
        if r.size == 0:
            continue
        if policy is Policy.UBS:
            tables[c] = np.minimum(grid[:, None], r[None, :]).sum(axis=1) / r.size
        else:
            tables[c] = np.minimum(grid, r.mean())
    if n == 1:
        return float(tables[0, steps]), np.array([1.0])
    if n == 2:
        vals = tables[0] + tables[1][::-1]
        k = int(np.argmax(vals))
        return float(vals[k]), np.array([grid[k], 1.0 - grid[k]])
    best, best_mu = -np.inf, None
    for a in range(steps + 1):
        b = np.arange(steps - a + 1)
        vals = tables[0, a] + tables[1, b] + tables[2, steps - a - b]
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, best_mu = float(vals[k]), np.array([grid[a], grid[b[k]], grid[steps - a - b[k]]])
    return best, best_mu
