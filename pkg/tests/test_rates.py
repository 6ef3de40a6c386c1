import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lifi_supercell.config import SystemConfig
from lifi_supercell.rates import (
    Policy, ScheduleVector, UeRealization, access_sum_rate, access_sum_rates, backhaul_rate, branch_sum_rate,
    cbs_bs_rate, cbs_bs_rates, cbs_bs_rates_general, cbs_ue_rates, effective_bandwidth_ratio,
    normalize_outer_tiers, ubs_ue_rate, ubs_ue_rates, ubs_ue_rates_general,
)
from lifi_supercell.topology import build_super_cell


def _real(n_tiers, counts, sinr, cfg=None):
    topo = build_super_cell(n_tiers, 2.5)
    members = tuple(topo.branch_members(1))
    return topo, UeRealization(1, members, counts, sinr)


def _random_instance(rng, n_tiers=3, m=12):
    topo = build_super_cell(n_tiers, 2.5)
    members = tuple(topo.branch_members(1))
    counts = rng.multinomial(m, np.full(len(members), 1 / len(members)))
    sinr = np.exp(rng.uniform(np.log(0.6), np.log(900), m))
    mu = rng.dirichlet(np.ones(len(members)))
    real = UeRealization(1, members, counts, sinr)
    return topo, real, ScheduleVector(1, members, mu)


# -- zeta and link rates ----------------------------------------------------------

def test_effective_bandwidth_ratio():
    sym = SystemConfig(backhaul_bandwidth_hz=20e6)
    assert effective_bandwidth_ratio(sym) == pytest.approx(1.0)
    assert effective_bandwidth_ratio(SystemConfig()) == pytest.approx(3 * (3070 / 3072) / (1022 / 1024), rel=1e-14)
    assert effective_bandwidth_ratio(SystemConfig()) == pytest.approx(3.00391, abs=1e-5)
    ratios = [effective_bandwidth_ratio(SystemConfig().with_bandwidth_ratio(b)) for b in (1, 1.5, 2, 3, 4)]
    assert np.all(np.diff(ratios) > 0)


def test_backhaul_rate(cfg):
    assert backhaul_rate(0.0, cfg) == 0.0
    k = np.logspace(-6, 0, 40)
    r = backhaul_rate(k, cfg)
    assert np.all(np.diff(r) > 0)
    # concavity in k on a uniform grid
    ku = np.linspace(0, 1, 41)
    assert np.all(np.diff(backhaul_rate(ku, cfg), 2) < 0)
    with pytest.raises(ValueError):
        backhaul_rate(-1e-3, cfg)


def test_backhaul_rate_prefactor_scaling():
    a, b = SystemConfig().with_bandwidth_ratio(1.0), SystemConfig().with_bandwidth_ratio(2.0)
    # the SNR also changes with B_b, so compare at equal per-subcarrier SNR
    ka, kb = 1e-3, 1e-3 * a.gamma_b / b.gamma_b
    ratio = backhaul_rate(kb, b) / backhaul_rate(ka, a)
    assert ratio == pytest.approx(2.0 * b.xi_b / a.xi_b, rel=1e-12)


# -- access -----------------------------------------------------------------------

def test_access_sum_rate_single_ue(cfg, dist):
    _, real = _real(1, [1, 0, 0, 0, 0, 0][:1], [dist.gamma_max])
    expected = cfg.xi_a * cfg.access_bandwidth_hz * math.log2(1 + dist.gamma_max)
    assert access_sum_rate(real.bs_indices[0], real, cfg) == pytest.approx(expected)


def test_access_sum_rate_identical_ues(cfg):
    _, one = _real(2, [1, 0, 0], [40.0])
    _, many = _real(2, [4, 0, 0], [40.0] * 4)
    i = one.bs_indices[0]
    assert access_sum_rate(i, many, cfg) == pytest.approx(access_sum_rate(i, one, cfg))
    assert access_sum_rate(many.bs_indices[2], many, cfg) == 0.0


def test_access_sum_rate_bounds(cfg, dist):
    rng = np.random.default_rng(0)
    _, real, _ = _random_instance(rng)
    r_min, r_max = dist.rate_bounds
    occupied = real.counts > 0
    rates = access_sum_rates(real, cfg)[occupied]
    assert np.all(rates >= r_min * 0.999) and np.all(rates <= r_max)


def test_realization_validation():
    with pytest.raises(ValueError):
        UeRealization(1, (1, 2), [1, 1], [1.0])
    with pytest.raises(ValueError):
        UeRealization(1, (1, 2), [1, -1], [])
    with pytest.raises(ValueError):
        UeRealization(1, (1,), [1], [float("nan")])


def test_schedule_validation():
    with pytest.raises(ValueError):
        ScheduleVector(1, (1, 2), [0.7, 0.7])
    with pytest.raises(ValueError):
        ScheduleVector(1, (1, 2), [1.2, -0.2])
    s = ScheduleVector(1, (1, 2), [1.0 + 5e-13, -5e-13])
    assert s.mu.min() >= 0.0 and s[1] == 1.0


# -- path normalization ----------------------------------------------------------

def test_normalize_one_tier():
    topo = build_super_cell(1, 2.5)
    s = ScheduleVector(1, (1,), [1.0])
    assert normalize_outer_tiers(topo, s) == {(1, 1): 1.0}


def test_normalize_equal_three_tier():
    topo = build_super_cell(3, 2.5)
    members = tuple(topo.branch_members(1))
    s = ScheduleVector(1, members, np.full(6, 1 / 6))
    mu = normalize_outer_tiers(topo, s)
    assert mu[(20, 20)] == pytest.approx(1.0)
    assert mu[(20, 1)] == pytest.approx(1 / 6)
    assert mu[(20, 8)] == pytest.approx(1 / 3)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_normalize_min_equals_mu(n_tiers, seed):
    rng = np.random.default_rng(seed)
    topo = build_super_cell(n_tiers, 2.5)
    members = tuple(topo.branch_members(1))
    w = rng.dirichlet(np.ones(len(members)))
    s = ScheduleVector(1, members, w)
    mu = normalize_outer_tiers(topo, s)
    for i in members:
        path = topo.path_to(i)
        assert mu[(i, path[0])] == pytest.approx(s[i], rel=1e-12)
        assert min(mu[(i, j)] for j in path) == pytest.approx(s[i], rel=1e-12)
    # scale invariance: the shares depend only on ratios of mu
    scaled = {k: v for k, v in mu.items()}
    c = rng.uniform(0.1, 10)
    for (i, j), v in scaled.items():
        total = sum(c * s[q] for q in topo.descendants[j])
        if total > 0:
            assert c * s[i] / total == pytest.approx(v, rel=1e-12)


def test_normalize_zero_subtree():
    topo = build_super_cell(2, 2.5)
    members = tuple(topo.branch_members(1))
    s = ScheduleVector(1, members, [1.0, 0.0, 0.0])
    mu = normalize_outer_tiers(topo, s)
    for i in members[1:]:
        assert mu[(i, i)] == 0.0


# -- UBS / CBS --------------------------------------------------------------------

def test_ubs_saturation_and_zero(cfg):
    _, real = _real(2, [2, 1, 0], [10.0, 20.0, 30.0])
    s = ScheduleVector.for_realization(real, [0.5, 0.3, 0.2])
    high = ubs_ue_rates(s, real, 1.0, cfg)
    access = cfg.xi_a * cfg.access_bandwidth_hz * np.log2(1 + real.sinr) / np.array([2, 2, 1])
    assert np.allclose(high, access)
    assert np.all(ubs_ue_rates(s, real, 0.0, cfg) == 0.0)
    assert ubs_ue_rate(1, real.bs_indices[0], s, real, 1.0, cfg) == pytest.approx(access[1])
    with pytest.raises(IndexError):
        ubs_ue_rate(2, real.bs_indices[0], s, real, 1.0, cfg)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1), st.floats(1e-7, 1.0))
def test_simplified_forms_match_path_forms(n_tiers, seed, k_b):
    cfg = SystemConfig()
    rng = np.random.default_rng(seed)
    topo, real, s = _random_instance(rng, n_tiers, m=int(rng.integers(1, 20)))
    k_links = {j: k_b for j in real.bs_indices}
    assert np.allclose(ubs_ue_rates(s, real, k_b, cfg), ubs_ue_rates_general(s, real, k_links, cfg, topo),
                       rtol=1e-12, atol=0)
    assert np.allclose(cbs_bs_rates(s, real, k_b, cfg), cbs_bs_rates_general(s, real, k_links, cfg, topo),
                       rtol=1e-12, atol=0)


def test_cbs_rates(cfg):
    _, real = _real(2, [2, 1, 1], [10.0, 20.0, 300.0, 5.0])
    s = ScheduleVector.for_realization(real, [0.0, 0.5, 0.5])
    assert cbs_bs_rate(real.bs_indices[0], s, real, 1.0, cfg) == 0.0
    ample = cbs_bs_rates(ScheduleVector.for_realization(real, [0.4, 0.3, 0.3]), real, 1e6, cfg)
    assert np.allclose(ample, access_sum_rates(real, cfg))


def test_cbs_ue_split_sums_to_cell_rate(cfg):
    rng = np.random.default_rng(5)
    for _ in range(20):
        _, real, s = _random_instance(rng, 3, 15)
        k_b = 10 ** rng.uniform(-6, -2)
        per_ue = cbs_ue_rates(s, real, k_b, cfg)
        per_bs = cbs_bs_rates(s, real, k_b, cfg)
        limited = s.mu * backhaul_rate(k_b, cfg) <= access_sum_rates(real, cfg)
        sums = np.bincount(real.cell_of_ue, weights=per_ue, minlength=real.n_bs)
        occupied = real.counts > 0
        assert np.allclose(sums[limited & occupied], per_bs[limited & occupied], rtol=1e-12)


def test_cbs_two_bs_hand_value(cfg):
    topo, real = _real(2, [1, 2, 0], [15.0, 3.0, 63.0])
    s = ScheduleVector.for_realization(real, [1 / 3, 1 / 3, 1 / 3])
    k_b = 1e-5
    rb = cfg.xi_b * cfg.backhaul_bandwidth_hz * math.log2(1 + k_b * cfg.gamma_b)
    ra = cfg.xi_a * cfg.access_bandwidth_hz
    cell1 = min(rb / 3, ra * 4.0)          # log2(16) = 4
    cell2 = min(rb / 3, ra * (2.0 + 6.0) / 2)  # log2(4) = 2, log2(64) = 6
    assert branch_sum_rate("CBS", s, real, k_b, cfg, topo) == pytest.approx(cell1 + cell2, rel=1e-12)


def test_empty_branch(cfg):
    _, real = _real(2, [0, 0, 0], [])
    s = ScheduleVector.for_realization(real, [1 / 3] * 3)
    for p in Policy:
        assert branch_sum_rate(p, s, real, 1.0, cfg) == 0.0


def test_sum_rate_never_exceeds_either_limit(cfg):
    rng = np.random.default_rng(11)
    for _ in range(50):
        topo, real, s = _random_instance(rng, int(rng.integers(1, 6)), int(rng.integers(1, 40)))
        k_b = 10 ** rng.uniform(-6, 0)
        cap = min(backhaul_rate(k_b, cfg), access_sum_rates(real, cfg).sum())
        for p in ("UBS", "CBS"):
            assert branch_sum_rate(p, s, real, k_b, cfg, topo) <= cap * (1 + 1e-12)


def test_ubs_monotone_in_mu_and_kb(cfg):
    rng = np.random.default_rng(2)
    _, real, _ = _random_instance(rng, 2, 9)
    n = real.n_bs
    prev = None
    for w in np.linspace(0, 1, 21):
        mu = np.full(n, (1 - w) / (n - 1))
        mu[0] = w
        r = ubs_ue_rates(ScheduleVector.for_realization(real, mu), real, 1e-4, cfg)[: real.counts[0]]
        if prev is not None:
            assert np.all(r >= prev - 1e-9)
        prev = r
    s = ScheduleVector.for_realization(real, np.full(n, 1 / n))
    rates = np.array([ubs_ue_rates(s, real, k, cfg) for k in np.logspace(-7, 0, 15)])
    assert np.all(np.diff(rates, axis=0) >= 0)


def test_policy_parse():
    assert Policy.parse("ubs") is Policy.UBS
    assert Policy.parse(Policy.CBS) is Policy.CBS
    with pytest.raises(ValueError):
        Policy.parse("XBS")
