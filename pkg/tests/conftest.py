"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

_CRITERIA = []


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and report.failed):
        _CRITERIA.append((props["criterion"], report.outcome, props.get("detail", "")))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, outcome, detail in sorted(_CRITERIA, key=lambda c: int(c[0].split()[0])):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"criterion {name}: {verdict}  {detail}")
