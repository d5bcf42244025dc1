from acceptance_report import RESULTS


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(RESULTS, key=lambda r: (int(r[0].rstrip("ab")), r[0])):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {title} ({detail})")
