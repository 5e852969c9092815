import pytest

_RESULTS = {}


@pytest.fixture
def criterion():
    """Record the outcome of one acceptance criterion for the summary."""
    def record(number, title, ok, detail=""):
        _RESULTS[(number, title)] = bool(ok), detail
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
        print(line + (f"  [{detail}]" if detail else ""))
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title in sorted(_RESULTS):
        ok, detail = _RESULTS[(number, title)]
        line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}: {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
