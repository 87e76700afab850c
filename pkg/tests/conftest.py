import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("pcv", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "pcv"))

# criterion number -> (passed, summary); filled by test_acceptance
ACCEPTANCE_LINES: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def report_criterion(capsys):
    def report(number: int, passed: bool, summary: str):
        ACCEPTANCE_LINES[number] = (passed, summary)
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if passed else 'FAIL'}: {summary}")
    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        ok, summary = ACCEPTANCE_LINES[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {summary}")
