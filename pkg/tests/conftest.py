import sys


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One verdict line per acceptance criterion, even under -q."""
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None) if mod else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        verdict, detail = results[num]
        line = f"criterion {num:2d}: {verdict}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
