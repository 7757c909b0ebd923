from pathlib import Path

import numpy as np
import pytest

from qbp4.codes import bch_713, compute_normalizer, load_code, to_quaternary
from qbp4.overcomplete import SearchEffort, generate_overcomplete

CODES = Path(__file__).resolve().parents[1] / "codes"


@pytest.fixture(scope="session")
def bch():
    return bch_713()


@pytest.fixture(scope="session")
def bch_s(bch):
    return to_quaternary(bch)


@pytest.fixture(scope="session")
def bch_perp(bch_s):
    return compute_normalizer(bch_s)


@pytest.fixture(scope="session")
def bch_oc(bch):
    return generate_overcomplete(bch, 7, effort=SearchEffort(exhaustive=True))


@pytest.fixture(scope="session")
def gb_a3():
    return load_code(CODES / "gb_a3.json")


@pytest.fixture(scope="session")
def gb_a4():
    return load_code(CODES / "gb_a4.json")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
