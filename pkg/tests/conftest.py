import pytest

from slicedvfs.model import PState, Processor, default_processor
from slicedvfs.policy import default_table

# filled by test_acceptance; one line per exit criterion
ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def proc():
    return default_processor()


@pytest.fixture
def table(proc):
    return default_table(proc)


@pytest.fixture
def two_state_proc():
    return Processor((PState(2_000_000_000, 1.2), PState(1_000_000_000, 0.9)), 10.0, 5e-9)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS, key=lambda k: int(k.split()[0][2:])):
        ok, detail = ACCEPTANCE_RESULTS[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {detail}")
