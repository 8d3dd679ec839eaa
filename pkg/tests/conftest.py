import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sofai.world import reference_task  # noqa: E402

ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def ref():
    return reference_task()


@pytest.fixture
def report(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def emit(criterion: str, ok: bool, detail: str = "") -> None:
        line = f"{criterion}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip()
        lines.append(line)
        print(line)

    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
