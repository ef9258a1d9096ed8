import os

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# criterion number -> (passed, detail); filled by test_acceptance.py
CRITERIA: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def record(key: str, passed: bool, detail: str) -> None:
        CRITERIA[key] = (passed, detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    groups: dict[str, list[str]] = {}
    for key in CRITERIA:
        groups.setdefault(key.rstrip("abcdefghijklmnopqrstuvwxyz"), []).append(key)
    for number, keys in groups.items():
        for key in keys:
            passed, detail = CRITERIA[key]
            terminalreporter.write_line(f"criterion {key}: {'PASS' if passed else 'FAIL'} - {detail}")
        if len(keys) > 1:
            failed = [k for k in keys if not CRITERIA[k][0]]
            verdict = "FAIL" if failed else "PASS"
            detail = f"failing clauses: {', '.join(failed)}" if failed else f"all {len(keys)} clauses"
            terminalreporter.write_line(f"criterion {number}: {verdict} - {detail}")
