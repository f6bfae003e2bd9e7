import shutil

import numpy as np
import pytest

from borrowimpact.fixtures import golden_dir


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def golden(tmp_path):
    """A private copy of the bundled dataset; returns its config path."""
    dest = tmp_path / "golden"
    shutil.copytree(golden_dir(), dest)
    return dest / "config.ini"


def pytest_terminal_summary(terminalreporter):
    lines = []
    for key in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(key, []):
            for name, value in getattr(rep, "user_properties", ()):
                if name == "acceptance":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
