from __future__ import annotations

import os

import pytest

# criterion number -> (name, passed, detail), filled in by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_collection_modifyitems(config, items):
    if os.environ.get("SECRECY_SLOW"):
        return
    skip = pytest.mark.skip(reason="set SECRECY_SLOW=1 to run the power-sweep tier")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        name, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}")
