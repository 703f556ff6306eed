"""Shared test plumbing: the acceptance-criteria report.

Tests in ``test_acceptance.py`` register one line per criterion through
``record_acceptance``; the hook below prints the collected lines in the
terminal summary so the pass/fail report is visible on every run.
"""

_ACCEPTANCE_RESULTS = []


def record_acceptance(number: int, description: str, passed: bool,
                      detail: str = "") -> None:
    line = f"ACCEPTANCE {number} {description} ... {'PASS' if passed else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    _ACCEPTANCE_RESULTS.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.ensure_newline()
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_RESULTS):
        terminalreporter.write_line(line)
