import pytest

from malleasim.profiles import load_profiles
from malleasim.workload import Job

# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def profiles():
    return load_profiles()


def make_job(job_id, app, *, submit=0.0, rigid=True, malleable=False,
             lower=2, upper=32, preferred=16, request=None):
    if rigid and request is None:
        request = upper
    return Job(job_id, submit, app, rigid, malleable, lower, upper, preferred,
               request if rigid else None)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
