import os

from hypothesis import settings

settings.register_profile("ci", max_examples=50, deadline=None)
settings.register_profile("dev", max_examples=20, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

# acceptance tests append (label, passed, detail) here; printed at session end
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(ACCEPTANCE_LINES, key=lambda r: _order(r[0])):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {label}: {detail}")


def _order(label):
    head = label.split()[1] if label.startswith("criterion") else label
    try:
        return int(head.rstrip(":"))
    except ValueError:
        return 99
