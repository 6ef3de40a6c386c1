"""Random UE placement over one branch of a super cell."""
from __future__ import annotations

import numpy as np

from ..channel import sample_ue_offsets, sinr_at_offset
from ..config import SystemConfig
from ..rates import UeRealization
from ..topology import SuperCellTopology


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_realization(topology: SuperCellTopology, cfg: SystemConfig, m_ues: int, seed,
                       branch: int = 1) -> UeRealization:
    """Drop ``m_ues`` UEs uniformly over the branch.

    The cell of each UE is uniform over the branch's attocells, and its
    position is uniform over the equivalent disc of that cell. ``seed`` may
    be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if m_ues < 0:
        raise ValueError("m_ues must be >= 0")
    members = tuple(topology.branch_members(branch))
    rng = _rng(seed)
    n_bs = len(members)
    counts = rng.multinomial(m_ues, np.full(n_bs, 1.0 / n_bs))
    r, theta = sample_ue_offsets(m_ues, cfg, rng)
    sinr = sinr_at_offset(r * np.cos(theta), r * np.sin(theta), cfg) if m_ues else np.zeros(0)
    return UeRealization(branch, members, counts, np.asarray(sinr, dtype=float).reshape(-1))
