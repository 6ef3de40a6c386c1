import numpy as np
import pytest

from lifi_supercell.channel import SinrDistribution, sample_sinr
from lifi_supercell.config import SystemConfig

_ACCEPTANCE_LINES: list[str] = []


def record_acceptance(line: str) -> None:
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def cfg() -> SystemConfig:
    return SystemConfig()


@pytest.fixture(scope="session")
def dist(cfg) -> SinrDistribution:
    d = SinrDistribution(cfg)
    # warm the memoised moments once for the whole session
    d.mean_sinr, d.mean_rate, d.rate_variance
    return d


@pytest.fixture(scope="session")
def mc_sinr(cfg) -> np.ndarray:
    return sample_sinr(1_000_000, cfg, np.random.default_rng(20240101))
