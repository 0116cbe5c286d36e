from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings

from diophdim.bestapprox import best_approx_sequence
from diophdim.cantor import CantorConfig, MassMeasure, build_tree
from diophdim.numeric import TargetVector

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def sqrt2():
    return TargetVector.parse("sqrt(2)")


@pytest.fixture(scope="session")
def pair():
    return TargetVector.parse("sqrt(2),sqrt(3)")


@pytest.fixture(scope="session")
def pair_seq(pair):
    return best_approx_sequence(pair, 10**5)


@pytest.fixture(scope="session")
def sqrt2_seq(sqrt2):
    return best_approx_sequence(sqrt2, 10**4)


@pytest.fixture(scope="session")
def tree(pair_seq):
    cfg = CantorConfig(v=Fraction(9, 5), s=Fraction(1, 2), J=1, mode="relaxed")
    return build_tree(pair_seq, cfg)


@pytest.fixture(scope="session")
def measure(tree):
    return MassMeasure.from_counts([lv.N for lv in tree.levels])


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_log(request):
    return request.config.stash[_ACCEPTANCE]


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
