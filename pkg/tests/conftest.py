import os

import pytest
from hypothesis import settings

# timing varies with load; examples are cheap but deadlines would make them flaky
settings.register_profile("default", deadline=None)
settings.load_profile("default")

# filled by the acceptance module, echoed in the terminal summary
CRITERIA: list[str] = []
SKIPPED: list[str] = []


def pytest_collection_modifyitems(config, items):
    if os.environ.get("TARDOS_NNS_FULL") == "1":
        return
    skip = pytest.mark.skip(reason="long-running; set TARDOS_NNS_FULL=1")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
            SKIPPED.append(f"SKIP  {item.name}: long-running, set TARDOS_NNS_FULL=1")


def pytest_terminal_summary(terminalreporter):
    if CRITERIA or SKIPPED:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA + SKIPPED:
            terminalreporter.write_line(line)
