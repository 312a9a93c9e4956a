from collections import defaultdict

import pytest

# criterion number -> list of (passed, detail)
_CRITERIA: dict = defaultdict(list)


@pytest.fixture
def record():
    def _record(number: int, passed: bool, detail: str = "") -> bool:
        _CRITERIA[number].append((bool(passed), detail))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        results = _CRITERIA[number]
        ok = all(p for p, _ in results)
        failed = [d for p, d in results if not p]
        if ok:
            detail = results[-1][1] if len(results) == 1 else f"{len(results)} checks"
        else:
            detail = "; ".join(failed)
        tr.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
