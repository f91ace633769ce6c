import numpy as np
import pytest
from hypothesis import settings

from simhar.skeleton import canonical_skeleton

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")


@pytest.fixture(scope="session")
def skel():
    return canonical_skeleton()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS = []


@pytest.fixture
def verdict(capsys):
    """Print and remember one pass/fail line for an acceptance criterion."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
        _VERDICTS.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
