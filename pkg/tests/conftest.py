import sys
import time
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

FIXTURES = Path(__file__).resolve().parent / "fixtures"
sys.path.insert(0, str(FIXTURES))

settings.register_profile("default", max_examples=100, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def replay_dir():
    return FIXTURES / "replay"


@pytest.fixture
def no_network(monkeypatch):
    """Fail the test if anything tries to open an HTTP connection."""
    import httpx

    calls = []

    def refuse(self, *args, **kwargs):
        calls.append(args)
        raise AssertionError("network access attempted")

    monkeypatch.setattr(httpx.Client, "send", refuse)
    monkeypatch.setattr(httpx.AsyncClient, "send", refuse)
    return calls


# acceptance criteria report one line each in the terminal summary
ACCEPTANCE_LINES = []


class _Criterion:
    def __init__(self, number, title, budget):
        self.number, self.title, self.budget = number, title, budget

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        over = self.budget is not None and elapsed >= self.budget
        ok = exc_type is None and not over
        limit = f" / budget {self.budget:.0f} s" if self.budget is not None else ""
        line = f"criterion {self.number:>2}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f} s{limit}) {self.title}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        if exc_type is None and over:
            raise AssertionError(f"criterion {self.number} took {elapsed:.2f} s, budget {self.budget} s")
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title, budget=seconds):`` times and reports one criterion."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
