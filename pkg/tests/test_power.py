import math
from types import SimpleNamespace

import mpmath as mp
import numpy as np
import pytest

from lifi_supercell.config import SystemConfig
from lifi_supercell.power import (
    Scheme, aspc_coefficient, arpc_coefficient, cap_coefficient, log_rate_coefficient, log_sinr_coefficient,
    mspc_coefficient, power_control,
)
from lifi_supercell.rates import access_rate, backhaul_rate
from lifi_supercell.topology import build_super_cell


def _mp_sinr_coefficient(gamma_ref, n_bs, cfg):
    mp.mp.dps = 50
    x = (1 + mp.mpf(gamma_ref)) ** (mp.mpf(n_bs) / mp.mpf(cfg.zeta)) - 1
    return x / mp.mpf(cfg.gamma_b)


def test_scheme_parse():
    assert Scheme.parse("aspc") is Scheme.ASPC
    assert Scheme.parse(Scheme.NPC) is Scheme.NPC
    with pytest.raises(ValueError):
        Scheme.parse("XPC")


def test_cap_examples():
    assert cap_coefficient(0.14) == 0.14
    assert cap_coefficient(1.7) == 1.0
    assert cap_coefficient(1.0) == 1.0
    assert cap_coefficient(math.inf) == 1.0
    with pytest.raises(ValueError):
        cap_coefficient(-0.1)


@pytest.mark.parametrize("n_tiers", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("ratio", [1.0, 2.0, 3.0, 4.0])
def test_against_high_precision(dist, n_tiers, ratio):
    cfg = SystemConfig().with_bandwidth_ratio(ratio)
    n = build_super_cell(n_tiers, cfg.cell_radius_m).n_bs_per_branch
    for ref in (dist.gamma_max, dist.mean_sinr):
        expect = _mp_sinr_coefficient(ref, n, cfg)
        assert log_sinr_coefficient(ref, n, cfg) == pytest.approx(float(mp.log(expect)), rel=1e-12, abs=1e-12)


def test_ordering_and_monotonicity(dist):
    for ratio in (1.0, 2.0, 3.0, 4.0):
        cfg = SystemConfig().with_bandwidth_ratio(ratio)
        prev = None
        for n_tiers in range(1, 6):
            topo = build_super_cell(n_tiers, cfg.cell_radius_m)
            ks = [f(cfg, topo, dist) for f in (arpc_coefficient, aspc_coefficient, mspc_coefficient)]
            assert ks[0] < ks[1] < ks[2] or ks[2] == math.inf
            if prev is not None:
                assert all(a <= b for a, b in zip(prev, ks))
            prev = ks
    # more backhaul bandwidth never needs more power
    topo = build_super_cell(3, 2.5)
    vals = [mspc_coefficient(SystemConfig().with_bandwidth_ratio(b), topo, dist) for b in (1, 2, 3, 4)]
    assert np.all(np.diff(vals) < 0)


def test_log_domain_no_overflow(dist):
    cfg = SystemConfig().with_bandwidth_ratio(1.0)
    topo = build_super_cell(5, cfg.cell_radius_m)
    res = power_control("MSPC", cfg, topo, dist)
    assert res.k_min > 1e30 and res.k_capped == 1.0
    assert res.backhaul_rate == pytest.approx(backhaul_rate(1.0, cfg))
    # far past the float range: exp(log K) overflows but log K stays exact
    res = power_control("MSPC", cfg, 400, dist)
    assert math.isfinite(res.log_k_min) and res.log_k_min > 709
    assert res.k_min == math.inf and res.k_capped == 1.0
    expect = mp.log(_mp_sinr_coefficient(dist.gamma_max, 400, cfg))
    assert res.log_k_min == pytest.approx(float(expect), rel=1e-13)


def test_re_evaluation(cfg, dist):
    """Plugging the coefficient back in reproduces the target rate exactly."""
    topo = build_super_cell(3, cfg.cell_radius_m)
    n = topo.n_bs_per_branch
    k = mspc_coefficient(cfg, topo, dist)
    assert backhaul_rate(k, cfg) == pytest.approx(n * access_rate(dist.gamma_max, cfg), rel=1e-10)
    k = aspc_coefficient(cfg, topo, dist)
    assert backhaul_rate(k, cfg) == pytest.approx(n * access_rate(dist.mean_sinr, cfg), rel=1e-10)
    k = arpc_coefficient(cfg, topo, dist)
    assert backhaul_rate(k, cfg) == pytest.approx(n * dist.mean_rate, rel=1e-10)


def test_mspc_never_bottlenecks(cfg, dist):
    """Under MSPC the bottleneck link covers every cell at peak access rate."""
    rng = np.random.default_rng(1)
    for n_tiers in (1, 2, 3):
        topo = build_super_cell(n_tiers, cfg.cell_radius_m)
        res = power_control("MSPC", cfg, topo, dist)
        if res.k_min > 1:
            continue
        n = topo.n_bs_per_branch
        gammas = rng.uniform(dist.gamma_min, dist.gamma_max, size=(200, n))
        assert np.all(access_rate(gammas, cfg).sum(axis=1) <= res.backhaul_rate * (1 + 1e-12))


def test_npc_and_degenerate():
    cfg = SystemConfig()
    flat = SimpleNamespace(gamma_max=0.0, mean_sinr=0.0, mean_rate=0.0)
    res = power_control("NPC", cfg, 3, flat)
    assert res.log_k_min == 0.0 and res.k_capped == 1.0
    for s in ("MSPC", "ASPC", "ARPC"):
        r = power_control(s, cfg, 3, flat)
        assert r.k_min == 0.0 and r.backhaul_rate == 0.0
    assert log_rate_coefficient(0.0, 4, cfg) == -math.inf
    with pytest.raises(ValueError):
        log_sinr_coefficient(-1.0, 1, cfg)
    with pytest.raises(ValueError):
        power_control("MSPC", cfg, 0, flat)
