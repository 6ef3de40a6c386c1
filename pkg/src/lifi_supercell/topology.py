"""Super-cell geometry and the per-branch backhaul tree.

Base stations sit on an unbounded hexagonal lattice with center spacing
sqrt(3)*R. The gateway BS (index 0) is at the origin. Tier ``n`` is the
n-th hexagonal ring around it and owns global indices
``1 + 3n(n-1) .. 3n(n+1)``, enumerated counterclockwise. Branch ``k``
covers the 60-degree wedge centred on tier-1 BS ``k``; branch 1 points
along +x.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

GATEWAY = 0
_EPS = 1e-9


def n_bs_per_branch(n_tiers: int) -> int:
    """Number of base stations in one branch of an ``n_tiers`` super cell."""
    if int(n_tiers) != n_tiers or n_tiers < 1:
        raise ValueError(f"n_tiers must be a positive integer, got {n_tiers!r}")
    return n_tiers * (n_tiers + 1) // 2


def tier_start(tier: int) -> int:
    return 1 + 3 * tier * (tier - 1)


def tier_end(tier: int) -> int:
    return 3 * tier * (tier + 1)


def tier_of(bs_index: int) -> int:
    """Tier containing global index ``bs_index`` (0 for the gateway)."""
    if bs_index < 0:
        raise ValueError(f"negative BS index {bs_index}")
    if bs_index == 0:
        return 0
    n = 1
    while tier_end(n) < bs_index:
        n += 1
    return n


def bottleneck_index(bs_index: int, tier: int) -> int:
    """Index of the tier-1 link that carries all traffic of ``bs_index``.

    Closed form ``floor((i - (3n-1)(n-1)) / n)``; valid because each tier
    lists its branches in consecutive blocks of ``n`` indices.
    """
    if tier < 1:
        raise ValueError(f"tier must be >= 1, got {tier}")
    if not tier_start(tier) <= bs_index <= tier_end(tier):
        raise ValueError(f"BS {bs_index} is not in tier {tier}")
    return (bs_index - (3 * tier - 1) * (tier - 1)) // tier


def _unit_vectors(spacing: float) -> np.ndarray:
    ang = np.radians(60.0 * np.arange(6))
    return spacing * np.column_stack([np.cos(ang), np.sin(ang)])


def _ring_points(n: int, spacing: float) -> np.ndarray:
    """All 6n lattice points of ring ``n``, counterclockwise from angle 0."""
    v = _unit_vectors(spacing)
    pts = []
    for k in range(6):
        a, b = v[k], v[(k + 1) % 6]
        for j in range(n):
            pts.append((n - j) * a + j * b)
    return np.array(pts)


def _branch_wedge(point: np.ndarray) -> int:
    """Branch (1..6) of a lattice point; wedge k spans [60(k-1)-30, 60(k-1)+30)."""
    ang = math.degrees(math.atan2(point[1], point[0]))
    shifted = (ang + 30.0) % 360.0
    # points exactly on a wedge boundary belong to the counterclockwise wedge
    k = int(math.floor((shifted + _EPS) / 60.0)) % 6
    return k + 1


def _ccw_key(point: np.ndarray, branch: int) -> float:
    # angle measured from the start of the branch wedge, so ordering never wraps
    ang = math.degrees(math.atan2(point[1], point[0]))
    return (ang - (60.0 * (branch - 1) - 30.0) + _EPS) % 360.0


@dataclass(frozen=True)
class SuperCellTopology:
    """Immutable description of an ``n_tiers``-tier super cell.

    Mappings are keyed by global BS index. ``paths[i]`` lists backhaul link
    indices from the bottleneck link outward (link ``j`` feeds BS ``j``);
    ``descendants[j]`` is the set of BSs whose path uses link ``j``.
    """

    n_tiers: int
    cell_radius: float
    n_bs_per_branch: int
    tier: dict
    branch: dict
    parent: dict
    positions: dict
    paths: dict
    descendants: dict

    @property
    def spacing(self) -> float:
        return math.sqrt(3.0) * self.cell_radius

    @property
    def bs_indices(self) -> list[int]:
        return sorted(self.tier)

    def tier_start(self, tier: int) -> int:
        return tier_start(tier)

    def branch_members(self, branch: int = 1) -> list[int]:
        """Global indices of one branch in ascending order."""
        if not 1 <= branch <= 6:
            raise ValueError(f"branch must be in 1..6, got {branch}")
        return sorted(i for i, b in self.branch.items() if b == branch)

    def path_to(self, bs_index: int) -> tuple[int, ...]:
        try:
            return self.paths[bs_index]
        except KeyError:
            raise KeyError(f"unknown BS index {bs_index}") from None

    def to_csv(self, path: str | Path) -> None:
        """Dump ``bs_index, tier, branch, x_m, y_m, parent_index`` rows."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["bs_index", "tier", "branch", "x_m", "y_m", "parent_index"])
            x0, y0 = 0.0, 0.0
            w.writerow([GATEWAY, 0, 0, f"{x0:.6f}", f"{y0:.6f}", ""])
            for i in self.bs_indices:
                x, y = self.positions[i]
                w.writerow([i, self.tier[i], self.branch[i], f"{x:.6f}", f"{y:.6f}", self.parent[i]])


def build_super_cell(n_tiers: int, cell_radius: float) -> SuperCellTopology:
    """Build the tiers, branch trees, paths and descendant sets.

    Each BS hangs off the geometrically nearest BS of the same branch in the
    next inner tier, ties going to the lower global index.
    """
    n_bs = n_bs_per_branch(n_tiers)
    if not cell_radius > 0:
        raise ValueError(f"cell_radius must be positive, got {cell_radius!r}")
    spacing = math.sqrt(3.0) * cell_radius

    tier: dict[int, int] = {}
    branch: dict[int, int] = {}
    positions: dict[int, tuple[float, float]] = {}
    for n in range(1, n_tiers + 1):
        pts = _ring_points(n, spacing)
        by_branch: dict[int, list[np.ndarray]] = {k: [] for k in range(1, 7)}
        for p in pts:
            by_branch[_branch_wedge(p)].append(p)
        idx = tier_start(n)
        for k in range(1, 7):
            members = sorted(by_branch[k], key=lambda p: _ccw_key(p, k))
            if len(members) != n:
                raise RuntimeError(f"tier {n} branch {k} has {len(members)} BSs, expected {n}")
            for p in members:
                tier[idx] = n
                branch[idx] = k
                positions[idx] = (float(p[0]), float(p[1]))
                idx += 1

    parent: dict[int, int] = {}
    for i, n in tier.items():
        if n == 1:
            parent[i] = GATEWAY
            continue
        px, py = positions[i]
        candidates = [j for j in range(tier_start(n - 1), tier_end(n - 1) + 1) if branch[j] == branch[i]]
        best = min(
            candidates,
            key=lambda j: (round(math.hypot(positions[j][0] - px, positions[j][1] - py) / spacing, 9), j),
        )
        parent[i] = best

    paths: dict[int, tuple[int, ...]] = {}
    for i in sorted(tier):
        chain = [i]
        while parent[chain[-1]] != GATEWAY:
            chain.append(parent[chain[-1]])
        paths[i] = tuple(reversed(chain))

    descendants: dict[int, frozenset[int]] = {j: set() for j in tier}
    for i, p in paths.items():
        for j in p:
            descendants[j].add(i)
    descendants = {j: frozenset(s) for j, s in descendants.items()}

    return SuperCellTopology(
        n_tiers=n_tiers,
        cell_radius=float(cell_radius),
        n_bs_per_branch=n_bs,
        tier=tier,
        branch=branch,
        parent=parent,
        positions=positions,
        paths=paths,
        descendants=descendants,
    )


def path_to(topology: SuperCellTopology, bs_index: int) -> tuple[int, ...]:
    return topology.path_to(bs_index)
