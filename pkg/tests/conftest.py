import sys

import numpy as np
import pytest

from ergodic_inference.quantization import alphabet_scheme, dyadic_scheme

TRACE = (1, 0, 1, 1, 0, 1)


@pytest.fixture
def binary():
    return alphabet_scheme(2)


@pytest.fixture
def dyadic():
    return dyadic_scheme()


@pytest.fixture
def rng():
    return np.random.default_rng(20261016)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    lines = getattr(module, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
