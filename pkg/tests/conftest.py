import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from dietmine.cli import packaged_taxonomy  # noqa: E402
from dietmine.taxonomy import load_taxonomy  # noqa: E402


@pytest.fixture(scope="session")
def taxonomy():
    return load_taxonomy(packaged_taxonomy())


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
