import numpy as np
import pytest
import torch

from posetransfer import synthdata


@pytest.fixture(scope="session")
def toy_dataset():
    return synthdata.generate_dataset(0, 3, 3)


@pytest.fixture(scope="session")
def desk_dataset():
    return synthdata.generate_dataset(0, 10, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(autouse=True)
def _torch_seed():
    torch.manual_seed(0)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for an acceptance check, then assert it."""
    lines = request.config.stash[_VERDICTS]

    def record(n, title, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} [{n:>2}] {title}: {detail}"
        lines.append((n, line))
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
