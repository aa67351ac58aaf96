import os

import pytest
from hypothesis import HealthCheck, settings

from helpers import ACCEPTANCE_LINES
from mmfluid.datasets import (
    four_phase,
    null_pair,
    positive_recurrent_pair,
    three_phase_with_zero,
    transient_pair,
)

settings.register_profile(
    "mmfluid",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("stress", parent=settings.get_profile("mmfluid"), max_examples=500)
settings.load_profile(os.environ.get("MMFLUID_HYPOTHESIS_PROFILE", "mmfluid"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def pr_pair():
    return positive_recurrent_pair()


@pytest.fixture
def tr_pair():
    return transient_pair()


@pytest.fixture
def nl_pair():
    return null_pair()


@pytest.fixture
def zero_model():
    return three_phase_with_zero()


@pytest.fixture
def four():
    return four_phase()
