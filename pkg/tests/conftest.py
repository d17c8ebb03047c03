import io

import pytest

from ffrank.cli import parse_and_dispatch

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record one verdict line per acceptance criterion."""

    def record(num: int, ok: bool, detail: str) -> None:
        line = f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[num] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[num])


def run_cli(*argv: str) -> tuple[int, str]:
    out = io.StringIO()
    code = parse_and_dispatch([str(a) for a in argv], out)
    return code, out.getvalue()


@pytest.fixture(scope="session")
def cli():
    return run_cli
