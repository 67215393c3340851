"""Shared test config: acceptance summary lines, one per criterion."""

CRITERIA = {
    "test_criterion_knn_exactness": "k-NN exactness vs exhaustive-sort oracle (20 corpora)",
    "test_criterion_formula_oracles": "coverage/concentration formula oracles (1000 fixtures)",
    "test_criterion_positional_identity": "positional support identity and acp/Av oracle",
    "test_criterion_parseval_suite": "PARSEVAL identities, duality, fixtures, * convention",
    "test_criterion_planted_recovery": "planted-structure recovery (zero-noise and noisy clusters)",
    "test_criterion_determinism_performance": "100K x 512 determinism and scan time",
    "test_criterion_directional_shape": "positional coverage decay vs flat curve",
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
