CRITERIA = {
    "test_criterion_exporter_round_trip": "[secondary] exporter round-trip",
}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    stats = terminalreporter.stats
    results = []
    for outcome in ("passed", "failed", "error"):
        for report in stats.get(outcome, []):
            if getattr(report, "when", "call") != "call" and outcome != "error":
                continue
            name = report.nodeid.split("::")[-1].split("[")[0]
            if name in CRITERIA:
                results.append((CRITERIA[name], outcome))
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for label, outcome in results:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {label}")
