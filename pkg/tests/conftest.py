import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile(
    "default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


ACCEPTANCE_LINES: list[tuple[int, str]] = []


class Criterion:
    """Records one acceptance verdict; a test that dies early is reported as FAIL."""

    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.line: str | None = None

    def check(self, ok: bool, detail: str = "") -> bool:
        self.line = f"[{'PASS' if ok else 'FAIL'}] criterion {self.number}: {self.title}" + (f" ({detail})" if detail else "")
        return ok


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    rec = Criterion(*marker.args)
    yield rec
    line = rec.line or f"[FAIL] criterion {rec.number}: {rec.title} (did not complete)"
    print("\n" + line)
    ACCEPTANCE_LINES.append((rec.number, line))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
