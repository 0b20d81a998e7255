import warnings

import numpy as np
import pytest

from mtdsic import REFERENCE_DELAYS_NS, RadioConfig, TapBank
from mtdsic.wiener import IllConditionedGramWarning

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(autouse=True)
def _quiet_gram_warnings():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IllConditionedGramWarning)
        yield


@pytest.fixture
def cfg():
    return RadioConfig()


@pytest.fixture
def d0_bank():
    return TapBank(np.array(REFERENCE_DELAYS_NS) * 1e-9)


@pytest.fixture
def uniform_bank():
    return TapBank.uniform(8, 0.1e-9, 0.2e-9)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
