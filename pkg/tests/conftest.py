import pytest

_LINES: dict[int, str] = {}


class _Recorder:
    def __init__(self, number: int, title: str):
        self.number = number
        self.title = title
        self.checks: list[tuple[str, bool]] = []

    def check(self, name: str, ok: bool) -> bool:
        self.checks.append((name, bool(ok)))
        return bool(ok)

    def finish(self) -> None:
        ok = all(passed for _, passed in self.checks)
        failed = [name for name, passed in self.checks if not passed]
        tail = f" (failed: {'; '.join(failed)})" if failed else ""
        _LINES[self.number] = f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title}{tail}"
        print(_LINES[self.number])
        assert ok, "; ".join(failed)


@pytest.fixture
def criterion(request):
    """Collects named sub-checks and reports one pass/fail line for the criterion."""
    marker = request.node.get_closest_marker("criterion")
    rec = _Recorder(*marker.args)
    yield rec
    if rec.number not in _LINES:
        _LINES[rec.number] = f"criterion {rec.number:2d} FAIL  {rec.title} (raised before finishing)"


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        terminalreporter.write_line(_LINES[k])
