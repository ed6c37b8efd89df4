import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

_ACCEPTANCE = {}


@pytest.fixture
def record():
    """``record(number, ok, detail)`` registers one acceptance line."""

    def _record(number, ok, detail):
        _ACCEPTANCE[number] = (bool(ok), detail)
        line = f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}: {detail}"
        sys.__stdout__.write("\n" + line + "\n")
        sys.__stdout__.flush()
        return ok

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"ACCEPTANCE {number:2d} {'PASS' if ok else 'FAIL'}: {detail}")
