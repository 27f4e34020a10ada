import math

import pytest
from hypothesis import HealthCheck, settings

from qccantor.construction import build
from qccantor.gauge import GaugeSpec, power_gauge

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_KEY = pytest.StashKey[list]()

CASE_B = GaugeSpec(d=1.0, eps_kind="inv_log_power", beta=1.0, t_cutoff=0.3)


def critical(K):
    return 2.0 / (K + 1.0)


@pytest.fixture(scope="session")
def power_trees():
    """Depth-3 trees at the critical exponent with the default schedule."""
    return {K: build(K, power_gauge(critical(K)), 3) for K in (1.5, 2.0, 3.0)}


@pytest.fixture(scope="session")
def tree2(power_trees):
    return power_trees[2.0]


@pytest.fixture(scope="session")
def tree2_depth2(tree2):
    return tree2.prefix(2)


@pytest.fixture(scope="session")
def small_tree():
    """A cheap K=2 tree with few disks (coarse schedule)."""
    return build(2.0, power_gauge(critical(2.0)), 2, (0.25, 0.125), sigma_max=0.5)


@pytest.fixture(scope="session")
def k1_tree():
    return build(1.0, power_gauge(1.0), 2, (0.25, 0.125), sigma_max=0.5)


@pytest.fixture(scope="session")
def case_b_tree():
    return build(2.0, CASE_B, 2, (0.3, 0.2), sigma_max=0.5, R_start=0.02)


@pytest.fixture(scope="session")
def eps_product3():
    return math.prod(1 - 2.0 ** (-n - 3) for n in (1, 2, 3))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
