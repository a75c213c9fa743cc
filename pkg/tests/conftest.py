import numpy as np
import pytest

from hydrolimit.lattice import load_model


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["zrp-linear", "zrp-constant", "zrp-capped", "glk-gaussian", "glk-perturbed"])
def model(request):
    return load_model(request.param)


CRITERIA = []


def record(number, passed, detail=""):
    CRITERIA.append((number, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(CRITERIA, key=lambda c: c[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
